"""Time evolution: stochastic walker stepping and the exact dense integrator.

Both modes use second-order Adams-Bashforth with an Euler bootstrap.  The
generator is piecewise constant, so AB2 restarts with an Euler step at every
segment boundary; it also restarts at observation times, which keeps every
micro-interval uniformly stepped (the number of restarts is fixed, so the
scheme stays globally second order).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import operators as ops
from . import walkers
from .circuits import Schedule
from .liouvillian import ColumnOracle, Location
from .operators import ModelValidationError, OperatorModel
from .rng import SpawnStreams
from .walkers import Population

_EXACT_MAX_QUBITS = 10
_TOL = 1e-9


@dataclass(frozen=True)
class DtPolicy:
    """Step-size policy: base dt, clamped so p_sp stays below p_max.

    The clamp uses the static column weight bound of each segment's
    generator and the largest spawn weight (3/2 for AB2).
    """

    base_dt: float = 1.0
    p_max: float = 0.1
    weight_max: float = 1.5

    def dt_for(self, oracle: ColumnOracle) -> float:
        bound = oracle.weight_bound()
        if bound <= 0:
            return self.base_dt
        return min(self.base_dt, self.p_max / (self.weight_max * bound))


@dataclass
class MicroInterval:
    segment_index: int
    t_start: float
    n_steps: int
    dt: float
    record: bool  # record state at the end of this interval


def build_grid(schedule: Schedule, observation_times: list[float],
               dt_per_segment: list[float]) -> list[MicroInterval]:
    """Cut the timeline at segment boundaries and observation times."""
    total = schedule.total_duration
    bounds = [0.0]
    for seg in schedule.segments:
        bounds.append(bounds[-1] + seg.duration)
    obs = sorted(observation_times)
    if obs and (obs[0] < -_TOL or obs[-1] > total + _TOL):
        raise ValueError("observation times outside the schedule window")
    events = sorted(set(bounds) | set(obs))
    merged = [events[0]]
    for t in events[1:]:
        if t - merged[-1] > _TOL:
            merged.append(t)
    obs_set = set(obs)
    grid = []
    seg_idx = 0
    for a, b in zip(merged, merged[1:]):
        while seg_idx + 1 < len(schedule.segments) and a >= bounds[seg_idx + 1] - _TOL:
            seg_idx += 1
        dt_target = dt_per_segment[seg_idx]
        length = b - a
        n_steps = max(1, math.ceil(length / dt_target - _TOL))
        record = any(abs(b - t) <= _TOL for t in obs_set)
        grid.append(MicroInterval(seg_idx, a, n_steps, length / n_steps, record))
    return grid


# ---------------------------------------------------------------------------
# Stochastic mode

def qmc_step_euler(curr: Population, dt: float, oracle: ColumnOracle,
                   xi: float, seed: int, step_index: int) -> Population:
    """curr + one unbiased sample of dt * L . curr."""
    if dt == 0:
        return curr
    buf = walkers.spawn(curr, oracle, dt, 1.0, xi, SpawnStreams(seed, step_index, 0))
    return walkers.merge(curr, buf)


def qmc_step_ab2(curr: Population, prev: Population, dt: float,
                 oracle_curr: ColumnOracle, oracle_prev: ColumnOracle,
                 xi: float, seed: int, step_index: int) -> Population:
    """AB2 update: curr + dt * (3/2 L.curr - 1/2 L.prev), sampled."""
    if dt == 0:
        return curr
    buf_a = walkers.spawn(curr, oracle_curr, dt, 1.5, xi,
                          SpawnStreams(seed, step_index, 0))
    buf_b = walkers.spawn(prev, oracle_prev, dt, -0.5, xi,
                          SpawnStreams(seed, step_index, 1))
    return walkers.merge(curr, buf_a, buf_b)


def qmc_evolve(schedule: Schedule, n_diag: int, xi: float, seed: int,
               observation_times: list[float],
               policy: DtPolicy = DtPolicy(),
               method: str = "ab2") -> list[tuple[float, Population]]:
    """Evolve one walker population, returning it at each observation time."""
    if method not in ("euler", "ab2"):
        raise ValueError(f"unknown method {method!r}")
    oracles = [ColumnOracle(schedule.n, OperatorModel(schedule.n, seg.active_terms),
                            list(schedule.channels))
               for seg in schedule.segments]
    dts = [policy.dt_for(o) for o in oracles]
    from .rng import INIT_STREAM, keyed_generator
    pop = walkers.initialize(schedule.initial_state, schedule.n, n_diag,
                             keyed_generator(INIT_STREAM, seed))
    out = []
    t = 0.0
    if any(abs(ot) <= _TOL for ot in observation_times):
        out.append((0.0, pop))
    if not schedule.segments:
        return out
    grid = build_grid(schedule, observation_times, dts)
    step_index = 0
    for interval in grid:
        oracle = oracles[interval.segment_index]
        prev: Population | None = None
        for _ in range(interval.n_steps):
            if method == "euler" or prev is None:
                new = qmc_step_euler(pop, interval.dt, oracle, xi, seed, step_index)
            else:
                new = qmc_step_ab2(pop, prev, interval.dt, oracle, oracle, xi,
                                   seed, step_index)
            prev, pop = pop, new
            step_index += 1
        t = interval.t_start + interval.n_steps * interval.dt
        if interval.record:
            out.append((t, pop))
    return out


# ---------------------------------------------------------------------------
# Exact mode

class _SegmentGenerator:
    """Dense operator form of one segment's generator, applied to rho."""

    def __init__(self, schedule: Schedule, seg_index: int):
        n = schedule.n
        seg = schedule.segments[seg_index]
        self.h = ops.dense_matrix(OperatorModel(n, seg.active_terms))
        self.channels = []
        for ch in schedule.channels:
            l = ops.dense_matrix(ch.jump)
            self.channels.append((ch.rate, l, l.conj().T @ l))

    def deriv(self, rho: np.ndarray) -> np.ndarray:
        acc = -1j * (self.h @ rho - rho @ self.h)
        for rate, l, ldl in self.channels:
            acc += 0.5 * rate * (2.0 * l @ rho @ l.conj().T - ldl @ rho - rho @ ldl)
        return acc


def exact_evolve(schedule: Schedule, observation_times: list[float],
                 policy: DtPolicy = DtPolicy(),
                 dt_override: float | None = None) -> list[tuple[float, np.ndarray]]:
    """Deterministic AB2 integration of the master equation.

    Returns vec(rho) (column stacking) at each observation time.  Limited to
    n <= 10 by the dense density-matrix representation.
    """
    n = schedule.n
    if n > _EXACT_MAX_QUBITS:
        raise ModelValidationError(f"exact_evolve limited to n <= {_EXACT_MAX_QUBITS}")
    dim = 1 << n
    rho = np.zeros((dim, dim), dtype=complex)
    for i, a in schedule.initial_state.items():
        for j, b in schedule.initial_state.items():
            rho[i, j] = a * np.conj(b)

    out = []
    if any(abs(ot) <= _TOL for ot in observation_times):
        out.append((0.0, rho.reshape(-1, order="F").copy()))
    if not schedule.segments:
        return out

    gens = [_SegmentGenerator(schedule, k) for k in range(len(schedule.segments))]
    if dt_override is not None:
        dts = [dt_override] * len(schedule.segments)
    else:
        oracles = [ColumnOracle(n, OperatorModel(n, seg.active_terms),
                                list(schedule.channels))
                   for seg in schedule.segments]
        dts = [policy.dt_for(o) for o in oracles]
    grid = build_grid(schedule, observation_times, dts)
    for interval in grid:
        gen = gens[interval.segment_index]
        dt = interval.dt
        f_prev = None
        for _ in range(interval.n_steps):
            f = gen.deriv(rho)
            if f_prev is None:
                rho = rho + dt * f
            else:
                rho = rho + dt * (1.5 * f - 0.5 * f_prev)
            f_prev = f
        if interval.record:
            t = interval.t_start + interval.n_steps * dt
            out.append((t, rho.reshape(-1, order="F").copy()))
    return out


def vec_entry(vec: np.ndarray, loc: Location, dim: int) -> complex:
    return vec[loc.row + dim * loc.col]
