"""Benchmark experiments as piecewise-constant schedules.

Built-in experiments on an n-qubit chain with always-on ZZ crosstalk and
local amplitude damping / dephasing:

* free evolution,
* staggered-XX dynamical decoupling (10 ns square X pulses, centered on
  their nominal instants; even qubits pulse at tau/2 + k*tau*2 and
  3tau/2 + k*2tau, odd qubits shifted by tau/2),
* GHZ preparation (|+0...0> followed by a CNOT ladder, one 50 ns two-qubit
  pulse + 10 ns idle per 60 ns cycle).

Dephasing channel convention: with the dissipator rate/2 * (2 L rho L+ -
{L+L, rho}) and L = sigma^z, a coherence decays at 2*gamma_z from dephasing
plus 1/(2 T1) from damping, so gamma_z = (1/T2 - 1/(2 T1)) / 2 reproduces a
total coherence decay of 1/T2.

All coefficients are angular frequencies in rad/ns.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import operators as ops
from .liouvillian import LindbladChannel
from .operators import IDENTITY2, OperatorModel, OperatorTerm, SIGMA_MINUS, SIGMA_X, SIGMA_Z

SparseKet = dict[int, complex]

PULSE_1Q_NS = 10.0
PULSE_2Q_NS = 50.0
CNOT_CYCLE_NS = 60.0

# pi/(2*10): a 10 ns square pulse of this sigma^x strength is an X gate
X_PULSE_RATE = math.pi / (2.0 * PULSE_1Q_NS)
# pi/(4*50): 50 ns of (I-Z)(x)(I-X) at this strength is an exact CNOT
CNOT_PULSE_RATE = math.pi / (4.0 * PULSE_2Q_NS)

COMPUTATIONAL = "computational"
HADAMARD_ROTATED = "hadamard-rotated"

_TOL = 1e-9


class ScheduleValidationError(ValueError):
    pass


def khz_to_rad_per_ns(value_khz: float) -> float:
    """Angular frequency in rad/ns for a plain frequency given in kHz."""
    return 2.0 * math.pi * value_khz * 1e-6


@dataclass(frozen=True)
class Segment:
    duration: float
    active_terms: tuple[OperatorTerm, ...]

    def __post_init__(self) -> None:
        if self.duration <= 0:
            raise ScheduleValidationError(f"segment duration {self.duration} <= 0")


@dataclass(frozen=True)
class Schedule:
    n: int
    segments: tuple[Segment, ...]
    channels: tuple[LindbladChannel, ...]
    initial_state: dict
    basis: str
    meta: dict = field(default_factory=dict)

    @property
    def total_duration(self) -> float:
        return sum(s.duration for s in self.segments)


def crosstalk_terms(n: int, J: float) -> list[OperatorTerm]:
    """ZZ coupling on every nearest-neighbor pair of the 1D chain."""
    if J == 0:
        return []
    return [
        ops.term(J, (i, SIGMA_Z), (i + 1, SIGMA_Z)) for i in range(n - 1)
    ]


def noise_channels(n: int, T1: float | None, T2: float | None) -> list[LindbladChannel]:
    """Per-qubit damping (rate 1/T1) and dephasing channels; None disables."""
    channels = []
    inv_t1 = 0.0 if T1 is None else 1.0 / T1
    for q in range(n):
        if T1 is not None:
            channels.append(
                LindbladChannel.make(inv_t1, ops.model(n, ops.term(1.0, (q, SIGMA_MINUS))))
            )
        if T2 is not None:
            gamma_z = (1.0 / T2 - 0.5 * inv_t1) / 2.0
            if gamma_z < -_TOL:
                raise ScheduleValidationError("T2 > 2*T1 is unphysical")
            if gamma_z > 0:
                channels.append(
                    LindbladChannel.make(gamma_z, ops.model(n, ops.term(1.0, (q, SIGMA_Z))))
                )
    return channels


def w_state(n: int) -> SparseKet:
    amp = 1.0 / math.sqrt(n)
    return {1 << q: complex(amp) for q in range(n)}


def ghz_state(n: int) -> SparseKet:
    amp = 1.0 / math.sqrt(2.0)
    return {0: complex(amp), (1 << n) - 1: complex(amp)}


def _conjugate_channels(channels: list[LindbladChannel]) -> tuple[LindbladChannel, ...]:
    return tuple(
        LindbladChannel.make(c.rate, ops.conjugate_by_hadamard(c.jump)) for c in channels
    )


def _conjugate_segments(segments: tuple[Segment, ...]) -> tuple[Segment, ...]:
    return tuple(
        Segment(s.duration, tuple(
            OperatorTerm(t.coefficient,
                         tuple((q, ops.HADAMARD @ m @ ops.HADAMARD) for q, m in t.factors))
            for t in s.active_terms))
        for s in segments
    )


def _segments_from_windows(n: int, total: float, base_terms: list[OperatorTerm],
                           pulse_windows: list[tuple[float, float, list[OperatorTerm]]],
                           ) -> tuple[Segment, ...]:
    """Cut [0, total] at all window edges; a window's terms are active inside it."""
    edges = {0.0, total}
    for a, b, _ in pulse_windows:
        if a > -_TOL and a < total:
            edges.add(max(a, 0.0))
        if b > 0 and b < total + _TOL:
            edges.add(min(b, total))
    cuts = sorted(edges)
    segments = []
    for a, b in zip(cuts, cuts[1:]):
        if b - a <= _TOL:
            continue
        mid = 0.5 * (a + b)
        terms = list(base_terms)
        for wa, wb, wterms in pulse_windows:
            if wa - _TOL <= mid <= wb + _TOL:
                terms.extend(wterms)
        segments.append(Segment(b - a, tuple(terms)))
    return tuple(segments)


def _x_pulse_terms(qubits: list[int]) -> list[OperatorTerm]:
    return [ops.term(X_PULSE_RATE, (q, SIGMA_X)) for q in qubits]


def build_dd_schedule(n: int, total_duration: float, tau: float,
                      T1: float | None, T2: float | None, J: float,
                      initial: str = "plus") -> Schedule:
    """Staggered-XX dynamical decoupling over an n-qubit chain.

    Even qubits follow f_{tau/2} - X - f_tau - X - f_{tau/2} per 2*tau cycle
    (pulse centers tau/2 and 3*tau/2); odd qubits are shifted by tau/2
    (centers tau and 2*tau).  Pulses are centered, so the last odd pulse of
    the final cycle is clipped at total_duration.
    """
    if n < 2:
        raise ScheduleValidationError("staggered DD needs n >= 2")
    if tau < 2 * PULSE_1Q_NS:
        raise ScheduleValidationError(f"tau={tau} too short for 10 ns pulses")
    cycle = 2.0 * tau
    n_cycles = total_duration / cycle
    if abs(n_cycles - round(n_cycles)) > _TOL or total_duration <= 0:
        raise ScheduleValidationError(
            f"total_duration={total_duration} is not a positive multiple of 2*tau={cycle}"
        )
    n_cycles = round(n_cycles)
    even = [q for q in range(n) if q % 2 == 0]
    odd = [q for q in range(n) if q % 2 == 1]
    half = 0.5 * PULSE_1Q_NS
    windows = []
    for k in range(n_cycles):
        t0 = k * cycle
        for center in (t0 + 0.5 * tau, t0 + 1.5 * tau):
            windows.append((center - half, center + half, _x_pulse_terms(even)))
        for center in (t0 + tau, t0 + 2.0 * tau):
            if odd:
                windows.append((center - half, center + half, _x_pulse_terms(odd)))
    base = crosstalk_terms(n, J)
    segments = _segments_from_windows(n, total_duration, base, windows)
    channels = tuple(noise_channels(n, T1, T2))
    meta = {"experiment": "dd", "tau": tau, "initial": initial}
    if initial == "plus":
        return Schedule(n, _conjugate_segments(segments), _conjugate_channels(list(channels)),
                        {0: 1.0 + 0j}, HADAMARD_ROTATED, meta)
    if initial == "w":
        return Schedule(n, segments, channels, w_state(n), COMPUTATIONAL, meta)
    raise ScheduleValidationError(f"unknown initial state {initial!r}")


def build_free_schedule(n: int, total_duration: float,
                        T1: float | None, T2: float | None, J: float,
                        initial: str = "plus") -> Schedule:
    """Free evolution: crosstalk + noise, no pulses."""
    if n < 1:
        raise ScheduleValidationError("n >= 1 required")
    base = crosstalk_terms(n, J)
    segments = () if total_duration == 0 else (Segment(total_duration, tuple(base)),)
    channels = tuple(noise_channels(n, T1, T2))
    meta = {"experiment": "free", "initial": initial}
    if initial == "plus":
        return Schedule(n, _conjugate_segments(segments), _conjugate_channels(list(channels)),
                        {0: 1.0 + 0j}, HADAMARD_ROTATED, meta)
    if initial == "w":
        return Schedule(n, segments, channels, w_state(n), COMPUTATIONAL, meta)
    raise ScheduleValidationError(f"unknown initial state {initial!r}")


def cnot_generator(control: int, target: int) -> OperatorTerm:
    """Two-qubit pulse generator whose 50 ns square pulse is an exact CNOT."""
    return ops.term(CNOT_PULSE_RATE,
                    (control, IDENTITY2 - SIGMA_Z),
                    (target, IDENTITY2 - SIGMA_X))


def build_ghz_schedule(n: int, T1: float | None, T2: float | None,
                       J: float) -> Schedule:
    """GHZ preparation: |+0...0> then n-1 sequential 60 ns CNOT cycles.

    The initial Hadamard on qubit 0 is absorbed into the initial state; each
    cycle is a 50 ns CNOT pulse (control i, target i+1) followed by a 10 ns
    idle.  Crosstalk and noise are active throughout.
    """
    if n < 2:
        raise ScheduleValidationError("GHZ preparation needs n >= 2")
    base = tuple(crosstalk_terms(n, J))
    idle = CNOT_CYCLE_NS - PULSE_2Q_NS
    segments = []
    for i in range(n - 1):
        segments.append(Segment(PULSE_2Q_NS, base + (cnot_generator(i, i + 1),)))
        segments.append(Segment(idle, base))
    initial = {0: 1 / math.sqrt(2) + 0j, 1: 1 / math.sqrt(2) + 0j}
    meta = {"experiment": "ghz"}
    return Schedule(n, tuple(segments), tuple(noise_channels(n, T1, T2)),
                    initial, COMPUTATIONAL, meta)


# ---------------------------------------------------------------------------
# JSON serialization (reproducibility record; format documented in README)

def _matrix_to_json(m: np.ndarray) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(m, dtype=complex)]


def _matrix_from_json(rows: list) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows])


def _term_to_json(t: OperatorTerm) -> dict:
    return {
        "coefficient": [t.coefficient.real, t.coefficient.imag],
        "factors": [{"qubit": q, "matrix": _matrix_to_json(m)} for q, m in t.factors],
    }


def _term_from_json(d: dict) -> OperatorTerm:
    coeff = complex(*d["coefficient"])
    return OperatorTerm(coeff, tuple(
        (f["qubit"], _matrix_from_json(f["matrix"])) for f in d["factors"]
    ))


def schedule_to_json(s: Schedule) -> str:
    doc = {
        "schema_version": 1,
        "n": s.n,
        "basis": s.basis,
        "meta": s.meta,
        "segments": [
            {"duration": seg.duration,
             "terms": [_term_to_json(t) for t in seg.active_terms]}
            for seg in s.segments
        ],
        "channels": [
            {"rate": c.rate,
             "jump_terms": [_term_to_json(t) for t in c.jump.terms]}
            for c in s.channels
        ],
        "initial_state": [
            [int(k), v.real, v.imag] for k, v in sorted(s.initial_state.items())
        ],
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def schedule_from_json(text: str) -> Schedule:
    doc = json.loads(text)
    n = doc["n"]
    segments = tuple(
        Segment(seg["duration"], tuple(_term_from_json(t) for t in seg["terms"]))
        for seg in doc["segments"]
    )
    channels = tuple(
        LindbladChannel.make(
            ch["rate"],
            OperatorModel(n, tuple(_term_from_json(t) for t in ch["jump_terms"])),
        )
        for ch in doc["channels"]
    )
    initial = {int(k): complex(re, im) for k, re, im in doc["initial_state"]}
    return Schedule(n, segments, channels, initial, doc["basis"], doc.get("meta", {}))
