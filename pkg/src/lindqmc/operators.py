"""k-local n-qubit operators as sums of tensor-product terms.

Operators are stored as sums of terms ``coefficient * M_{q1} (x) M_{q2} (x) ...``
where each ``M_q`` is an arbitrary 2x2 complex matrix acting on qubit ``q``.
Qubit ``q`` corresponds to bit ``q`` of the computational-basis index
(qubit 0 is the least significant bit).  Coefficients carry angular-frequency
units (rad/ns) for Hamiltonian terms; jump operators are dimensionless.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

# Single-qubit constants.  sigma_minus lowers |1> to |0>.
IDENTITY2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)

_DENSE_MAX_QUBITS = 10

TWO_PI = 2.0 * np.pi


class ModelValidationError(ValueError):
    """Raised when an operator model violates its structural invariants."""


@dataclass(frozen=True)
class OperatorTerm:
    """One tensor-product term: ``coefficient * prod_q M_q``.

    ``factors`` maps distinct qubit indices to 2x2 matrices; qubits not
    listed carry the identity.  An empty factor list is the (scaled)
    identity operator.
    """

    coefficient: complex
    factors: tuple[tuple[int, np.ndarray], ...]

    def __post_init__(self) -> None:
        qubits = [q for q, _ in self.factors]
        if len(set(qubits)) != len(qubits):
            raise ModelValidationError(f"duplicate qubit indices in term: {qubits}")
        for _, mat in self.factors:
            if np.shape(mat) != (2, 2):
                raise ModelValidationError("factor matrices must be 2x2")


@dataclass(frozen=True)
class OperatorModel:
    """Sum of k-local tensor-product terms on ``n`` qubits."""

    n: int
    terms: tuple[OperatorTerm, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        for term in self.terms:
            for q, _ in term.factors:
                if not 0 <= q < self.n:
                    raise ModelValidationError(
                        f"qubit index {q} out of range for n={self.n}"
                    )


def term(coefficient: complex, *factors: tuple[int, np.ndarray]) -> OperatorTerm:
    return OperatorTerm(complex(coefficient), tuple((q, np.asarray(m, dtype=complex)) for q, m in factors))


def model(n: int, *terms: OperatorTerm) -> OperatorModel:
    return OperatorModel(n, tuple(terms))


def apply_to_ket(op: OperatorModel, ket: int) -> list[tuple[int, complex]]:
    """Sparse action of the model on a computational-basis ket.

    Returns the nonzero amplitudes of ``(sum of terms)|ket>`` as
    ``(basis index, amplitude)`` pairs with duplicate targets summed and
    exact zeros dropped.
    """
    if not 0 <= ket < (1 << op.n):
        raise ModelValidationError(f"ket {ket} out of range for n={op.n}")
    out: dict[int, complex] = {}
    for t in op.terms:
        k = len(t.factors)
        in_bits = [(ket >> q) & 1 for q, _ in t.factors]
        for out_bits in itertools.product((0, 1), repeat=k):
            amp = t.coefficient
            target = ket
            for (q, mat), b_in, b_out in zip(t.factors, in_bits, out_bits):
                amp *= mat[b_out, b_in]
                if amp == 0:
                    break
                if b_out != b_in:
                    target ^= 1 << q
            else:
                out[target] = out.get(target, 0) + amp
    return [(idx, amp) for idx, amp in out.items() if amp != 0]


def _map_factors(op: OperatorModel, f, coeff_f=lambda c: c) -> OperatorModel:
    new_terms = tuple(
        OperatorTerm(coeff_f(t.coefficient), tuple((q, f(m)) for q, m in t.factors))
        for t in op.terms
    )
    return OperatorModel(op.n, new_terms)


def conjugate_by_hadamard(op: OperatorModel) -> OperatorModel:
    """Conjugate every single-qubit factor by the Hadamard gate.

    The returned model's dense matrix equals H^(x)n . M . H^(x)n.
    """
    return _map_factors(op, lambda m: HADAMARD @ m @ HADAMARD)


def transpose(op: OperatorModel) -> OperatorModel:
    """Transpose of the model (tensor transpose of every factor)."""
    return _map_factors(op, lambda m: m.T.copy())


def dagger(op: OperatorModel) -> OperatorModel:
    """Hermitian adjoint of the model."""
    return _map_factors(op, lambda m: m.conj().T.copy(), coeff_f=np.conj)


def _multiply_terms(a: OperatorTerm, b: OperatorTerm) -> OperatorTerm:
    """Product term a.b; factors on shared qubits compose by matrix product."""
    fa = dict(a.factors)
    fb = dict(b.factors)
    qubits = sorted(set(fa) | set(fb))
    factors = []
    for q in qubits:
        m = fa.get(q, IDENTITY2) @ fb.get(q, IDENTITY2)
        factors.append((q, m))
    return OperatorTerm(a.coefficient * b.coefficient, tuple(factors))


def multiply(a: OperatorModel, b: OperatorModel) -> OperatorModel:
    """Operator product a.b as an expanded sum of tensor-product terms."""
    if a.n != b.n:
        raise ModelValidationError("qubit counts differ")
    terms = tuple(_multiply_terms(ta, tb) for ta in a.terms for tb in b.terms)
    return OperatorModel(a.n, terms)


def dense_matrix(op: OperatorModel) -> np.ndarray:
    """Dense 2^n x 2^n matrix of the model.  Test oracle; n <= 10 only."""
    if op.n > _DENSE_MAX_QUBITS:
        raise ModelValidationError(f"dense_matrix limited to n <= {_DENSE_MAX_QUBITS}")
    dim = 1 << op.n
    out = np.zeros((dim, dim), dtype=complex)
    for t in op.terms:
        fac = dict(t.factors)
        acc = np.array([[t.coefficient]], dtype=complex)
        # qubit 0 is the least significant bit, so it is the last Kronecker factor
        for q in range(op.n - 1, -1, -1):
            acc = np.kron(acc, fac.get(q, IDENTITY2))
        out += acc
    return out


# Pauli strings for dense -> model decomposition.
_PAULIS = (IDENTITY2, SIGMA_X, SIGMA_Y, SIGMA_Z)


def model_from_dense(matrix: np.ndarray, n: int, tol: float = 1e-13) -> OperatorModel:
    """Expand a dense 2^n x 2^n matrix into Pauli-string tensor-product terms.

    Used to push arbitrary small-n operators (e.g. basis-rotated Redfield
    generators) through the same sparse machinery.  Coefficients below
    ``tol`` are dropped.
    """
    dim = 1 << n
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.shape != (dim, dim):
        raise ModelValidationError(f"matrix shape {matrix.shape} != ({dim},{dim})")
    terms = []
    for combo in itertools.product(range(4), repeat=n):
        # combo[q] selects the Pauli on qubit q
        acc = np.array([[1.0]], dtype=complex)
        for q in range(n - 1, -1, -1):
            acc = np.kron(acc, _PAULIS[combo[q]])
        coeff = np.trace(acc.conj().T @ matrix) / dim
        if abs(coeff) <= tol:
            continue
        factors = tuple((q, _PAULIS[combo[q]]) for q in range(n) if combo[q] != 0)
        terms.append(OperatorTerm(complex(coeff), factors))
    return OperatorModel(n, tuple(terms))
