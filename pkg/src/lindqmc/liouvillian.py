"""Sparse column oracle for the vectorized master-equation generator.

The density matrix is column-stacked, ``vec(rho)[i + D*j] = rho_{ij}``, so
``vec(A rho B) = (B^T kron A) vec(rho)``.  The generator is

    L = -i (I kron H) + i (H^T kron I)
        + sum_k rate_k/2 (2 conj(L_k) kron L_k - I kron L_k^+ L_k
                          - (L_k^+ L_k)^T kron I)

with the conjugations required for complex jump operators.  Rates may be
negative (non-Markovian models).  Time dependence enters only through which
Hamiltonian terms are active, so an oracle instance is built per schedule
segment and cached columns stay valid for that segment.
"""

from __future__ import annotations

import math

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import operators as ops
from .operators import ModelValidationError, OperatorModel

_DENSE_MAX_QUBITS = 5


class Location(NamedTuple):
    """Density-matrix element rho_{row,col}; diagonal iff row == col."""

    row: int
    col: int


@dataclass(frozen=True)
class LindbladChannel:
    """One dissipation channel: rate (1/ns, may be negative) and jump operator.

    ``jump_dagger_jump`` is precomputed as an expanded term model of L^+ L.
    """

    rate: float
    jump: OperatorModel
    jump_dagger_jump: OperatorModel

    @classmethod
    def make(cls, rate: float, jump: OperatorModel) -> "LindbladChannel":
        return cls(float(rate), jump, ops.multiply(ops.dagger(jump), jump))


class ColumnOracle:
    """Columns of the generator for a fixed (Hamiltonian, channels) pair.

    ``hamiltonian`` may be non-Hermitian (Redfield commutator generator);
    the commutator is vectorized verbatim.  Columns are cached; the cache
    is append-only, so concurrent readers are safe once built.
    """

    def __init__(self, n: int, hamiltonian: OperatorModel | None,
                 channels: list[LindbladChannel]):
        self.n = n
        self.dim = 1 << n
        self.hamiltonian = hamiltonian
        self.channels = list(channels)
        self._ham_t = ops.transpose(hamiltonian) if hamiltonian is not None else None
        self._ldl_t = [ops.transpose(c.jump_dagger_jump) for c in self.channels]
        self._cache: dict[Location, list[tuple[Location, complex]]] = {}
        self._tables: dict[Location, SpawnTable] = {}

    def column(self, source: Location) -> list[tuple[Location, complex]]:
        cached = self._cache.get(source)
        if cached is not None:
            return cached
        i, j = source
        if not (0 <= i < self.dim and 0 <= j < self.dim):
            raise ModelValidationError(f"location {source} out of range for n={self.n}")
        # contributions are collected per target and reduced with exact
        # summation, so structured cancellations (e.g. opposite-rate
        # dephasing) produce exact zeros instead of float residue
        out: dict[Location, list[complex]] = {}

        def add(loc: Location, amp: complex) -> None:
            out.setdefault(loc, []).append(amp)

        if self.hamiltonian is not None:
            for k, amp in ops.apply_to_ket(self.hamiltonian, i):
                add(Location(k, j), -1j * amp)
            for l, amp in ops.apply_to_ket(self._ham_t, j):
                add(Location(i, l), 1j * amp)
        for ch, ldl_t in zip(self.channels, self._ldl_t):
            g = ch.rate
            # 2 L rho L^+ : targets (k,l) with L_{ki} conj(L_{lj})
            left = ops.apply_to_ket(ch.jump, i)
            right = ops.apply_to_ket(ch.jump, j)
            for k, a in left:
                for l, b in right:
                    add(Location(k, l), g * a * np.conj(b))
            # - L^+L rho  and  - rho L^+L
            for k, a in ops.apply_to_ket(ch.jump_dagger_jump, i):
                add(Location(k, j), -0.5 * g * a)
            for l, a in ops.apply_to_ket(ldl_t, j):
                add(Location(i, l), -0.5 * g * a)

        col = []
        for loc, amps in out.items():
            amp = complex(math.fsum(a.real for a in amps),
                          math.fsum(a.imag for a in amps))
            if amp != 0:
                col.append((loc, amp))
        self._cache[source] = col
        return col

    def spawn_table(self, source: Location) -> "SpawnTable":
        cached = self._tables.get(source)
        if cached is None:
            cached = build_spawn_table(self.column(source))
            self._tables[source] = cached
        return cached

    def weight_bound(self) -> float:
        """Static upper bound on the column weight sum(|Re|+|Im|) of any column.

        Used to pick stable time steps before populations exist.
        """
        bound = 0.0

        def colsum(m: np.ndarray) -> float:
            return float(np.abs(m).sum(axis=0).max())

        def model_colsum(op: OperatorModel) -> float:
            s = 0.0
            for t in op.terms:
                prod = abs(t.coefficient)
                for _, m in t.factors:
                    prod *= colsum(m)
                s += prod
            return s

        if self.hamiltonian is not None:
            bound += 2.0 * model_colsum(self.hamiltonian)
        for ch in self.channels:
            sj = model_colsum(ch.jump)
            bound += abs(ch.rate) * (sj * sj + model_colsum(ch.jump_dagger_jump))
        # |Re|+|Im| <= sqrt(2)|z| per entry
        return np.sqrt(2.0) * bound


class SpawnTable(NamedTuple):
    """Column split into real/imaginary spawn channels.

    ``signs`` hold the channel sign for positive weight; ``probs`` is None
    for single-channel columns (the multinomial split is then trivial).
    """

    targets: tuple[Location, ...]
    signs: tuple[complex, ...]
    total_weight: float
    probs: np.ndarray | None


def build_spawn_table(col: list[tuple[Location, complex]]) -> SpawnTable:
    targets: list[Location] = []
    signs: list[complex] = []
    weights: list[float] = []
    for tgt, amp in col:
        re, im = amp.real, amp.imag
        if re != 0:
            targets.append(tgt)
            signs.append(1 if re > 0 else -1)
            weights.append(abs(re))
        if im != 0:
            targets.append(tgt)
            signs.append(1j if im > 0 else -1j)
            weights.append(abs(im))
    warr = np.asarray(weights, dtype=float)
    wtot = float(warr.sum())
    probs = warr / wtot if len(weights) > 1 else None
    return SpawnTable(tuple(targets), tuple(signs), wtot, probs)


def column(source: Location, hamiltonian: OperatorModel | None,
           channels: list[LindbladChannel], n: int) -> list[tuple[Location, complex]]:
    """One-shot column evaluation (convenience wrapper around ColumnOracle)."""
    return ColumnOracle(n, hamiltonian, channels).column(source)


def dense_liouvillian(hamiltonian: OperatorModel | None,
                      channels: list[LindbladChannel], n: int) -> np.ndarray:
    """Dense 4^n x 4^n generator matrix.  Test oracle; n <= 5 only."""
    if n > _DENSE_MAX_QUBITS:
        raise ModelValidationError(f"dense_liouvillian limited to n <= {_DENSE_MAX_QUBITS}")
    dim = 1 << n
    eye = np.eye(dim, dtype=complex)
    out = np.zeros((dim * dim, dim * dim), dtype=complex)
    if hamiltonian is not None:
        h = ops.dense_matrix(hamiltonian)
        out += -1j * np.kron(eye, h) + 1j * np.kron(h.T, eye)
    for ch in channels:
        l = ops.dense_matrix(ch.jump)
        ldl = l.conj().T @ l
        out += 0.5 * ch.rate * (
            2.0 * np.kron(l.conj(), l) - np.kron(eye, ldl) - np.kron(ldl.T, eye)
        )
    return out


def vec_index(loc: Location, dim: int) -> int:
    """Linear index of a location under column stacking."""
    return loc.row + dim * loc.col
