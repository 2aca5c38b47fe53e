"""Two-qubit non-Markovian Redfield model.

Rate eigenvalues come from diagonalizing the 2x2 rate matrix
C = [[gamma1/2, c], [conj(c), gamma2/2]] with c = (gamma1+gamma2)/4 + i*kappa,
whose eigenvalues are (gamma1+gamma2)/4 +/- sqrt((gamma1^2+gamma2^2+8 kappa^2)/8);
the smaller one can be negative.  The jump operators are L_k = sum_j U_kj
sigma^-_j with U the diagonalizing unitary (U C U^+ = diag(lambda)).

The commutator generator K = sum_ij A_ij sigma^+_j sigma^-_i is non-Hermitian
(A carries imaginary off-diagonal parts) and is vectorized verbatim as
-i(I kron K) + i(K^T kron I).

Simulation runs in the orthonormal basis |0>, L1+|0>, L2+|0>, L2+L1+|0>
(normalized), where the tracked elements rho~_kk are direct diagonal
locations and the initial state (|0>+|1>+|2>)/sqrt(3) is sparse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import operators as ops
from .circuits import Schedule, Segment
from .estimators import ObservableSpec
from .liouvillian import LindbladChannel, Location
from .operators import OperatorModel, SIGMA_MINUS, SIGMA_PLUS

REDFIELD_ROTATED = "redfield-rotated"


class RedfieldConsistencyError(RuntimeError):
    pass


@dataclass(frozen=True)
class RedfieldParams:
    omega1: float
    omega2: float
    gamma1: float
    gamma2: float
    alpha: float
    kappa: float

    def __post_init__(self) -> None:
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ValueError("gamma rates must be >= 0")


@dataclass(frozen=True)
class RedfieldModel:
    params: RedfieldParams
    rates: tuple[float, float]
    a_matrix: np.ndarray
    rotation: np.ndarray  # columns are the rotated basis states
    hamiltonian: OperatorModel  # rotated commutator generator K~
    channels: tuple[LindbladChannel, ...]  # rotated jump operators
    lab_hamiltonian: OperatorModel
    lab_jumps: tuple[np.ndarray, np.ndarray]


def rates(params: RedfieldParams) -> tuple[float, float]:
    """Closed-form rate eigenvalues; the first takes the minus branch."""
    mean = (params.gamma1 + params.gamma2) / 4.0
    rad = math.sqrt((params.gamma1**2 + params.gamma2**2 + 8.0 * params.kappa**2) / 8.0)
    return mean - rad, mean + rad


def frequency_matrix(params: RedfieldParams) -> np.ndarray:
    g = (params.gamma1 - params.gamma2) / 8.0
    off = params.alpha + params.kappa / 2.0
    return np.array(
        [
            [params.omega1 + params.alpha, off - 1j * g],
            [off + 1j * g, params.omega2 + params.alpha + params.kappa],
        ],
        dtype=complex,
    )


def _commutator_generator(a: np.ndarray) -> OperatorModel:
    """K = sum_ij A_ij sigma^+_j sigma^-_i on qubits 0 (first) and 1 (second)."""
    number_op = SIGMA_PLUS @ SIGMA_MINUS  # |1><1|
    terms = []
    for i in range(2):
        for j in range(2):
            if a[i, j] == 0:
                continue
            if i == j:
                terms.append(ops.term(a[i, j], (i, number_op)))
            else:
                terms.append(ops.term(a[i, j], (j, SIGMA_PLUS), (i, SIGMA_MINUS)))
    return OperatorModel(2, tuple(terms))


def build_model(params: RedfieldParams) -> RedfieldModel:
    lam = rates(params)
    c = (params.gamma1 + params.gamma2) / 4.0 + 1j * params.kappa
    rate_matrix = np.array(
        [[params.gamma1 / 2.0, c], [np.conj(c), params.gamma2 / 2.0]], dtype=complex
    )
    evals, evecs = np.linalg.eigh(rate_matrix)  # ascending
    if max(abs(evals[0] - lam[0]), abs(evals[1] - lam[1])) > 1e-8:
        raise RedfieldConsistencyError(
            f"diagonalization eigenvalues {evals} != closed form {lam}"
        )
    u = evecs.conj().T  # U C U^+ = diag(lam)

    sm = [ops.dense_matrix(ops.model(2, ops.term(1.0, (q, SIGMA_MINUS)))) for q in range(2)]
    l_dense = [u[k, 0] * sm[0] + u[k, 1] * sm[1] for k in range(2)]

    a = frequency_matrix(params)
    lab_h = _commutator_generator(a)
    k_dense = ops.dense_matrix(lab_h)

    # rotated orthonormal basis
    e0 = np.zeros(4, dtype=complex)
    e0[0] = 1.0
    def raised(mats, vec):
        out = vec
        for m in mats:
            out = m.conj().T @ out
        norm = np.linalg.norm(out)
        if norm < 1e-12:
            raise RedfieldConsistencyError("degenerate rotated basis vector")
        return out / norm

    basis = np.column_stack([
        e0,
        raised([l_dense[0]], e0),
        raised([l_dense[1]], e0),
        raised([l_dense[0], l_dense[1]], e0),  # L2+ L1+ |0>
    ])
    gram = basis.conj().T @ basis
    if np.max(np.abs(gram - np.eye(4))) > 1e-10:
        raise RedfieldConsistencyError("rotated basis is not orthonormal")

    k_rot = basis.conj().T @ k_dense @ basis
    channels = tuple(
        LindbladChannel.make(
            lam[k], ops.model_from_dense(basis.conj().T @ l_dense[k] @ basis, 2)
        )
        for k in range(2)
    )
    return RedfieldModel(
        params=params,
        rates=lam,
        a_matrix=a,
        rotation=basis,
        hamiltonian=ops.model_from_dense(k_rot, 2),
        channels=channels,
        lab_hamiltonian=lab_h,
        lab_jumps=(l_dense[0], l_dense[1]),
    )


def initial_state(model: RedfieldModel) -> dict[int, complex]:
    """(|0~> + |1~> + |2~>)/sqrt(3) in rotated coordinates."""
    amp = 1.0 / math.sqrt(3.0)
    return {0: complex(amp), 1: complex(amp), 2: complex(amp)}


def rotated_element_specs(model: RedfieldModel) -> list[ObservableSpec]:
    """Diagonal elements rho~_00, rho~_11, rho~_22 in the simulation basis."""
    return [
        ObservableSpec(kind="matrix_element", name=f"rho{k}{k}",
                       target_location=Location(k, k))
        for k in range(3)
    ]


def build_schedule(model: RedfieldModel, duration: float) -> Schedule:
    """Single-segment schedule for the rotated-basis Redfield evolution."""
    segments = () if duration == 0 else (
        Segment(duration, model.hamiltonian.terms),
    )
    return Schedule(
        n=2,
        segments=segments,
        channels=model.channels,
        initial_state=initial_state(model),
        basis=REDFIELD_ROTATED,
        meta={"experiment": "redfield", "rates": list(model.rates)},
    )
