"""Stochastic walker populations: spawn, annihilation-by-merge, diagnostics.

A population stores, per density-matrix location, the net Gaussian-integer
walker count a + i b.  Individual walkers are never stored: opposite signs
at the same location cancel the moment they are merged, which is the
annihilation mechanism that suppresses the sign problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .liouvillian import ColumnOracle, Location
from .rng import SpawnStreams

SparseKet = dict[int, complex]
Counts = dict[Location, complex]


class StepSizeError(RuntimeError):
    """Spawn probability exceeded 1; the time step is too large."""

    def __init__(self, location: Location, p: float):
        super().__init__(
            f"spawn probability {p:.4g} > 1 at location {location}; reduce dt"
        )
        self.location = location
        self.p = p


@dataclass
class Population:
    """Sparse map from location to net Gaussian-integer walker count."""

    n: int
    counts: Counts = field(default_factory=dict)
    n_diag_initial: int = 1

    @property
    def n_tot(self) -> int:
        return sum(int(abs(c.real)) + int(abs(c.imag)) for c in self.counts.values())

    @property
    def dim_occupied(self) -> int:
        return len(self.counts)


@dataclass
class PopulationStats:
    t: float
    n_tot: int
    re_ndiag: int
    im_ndiag: int
    theta: float
    dim_occupied: int
    theta_degenerate: bool = False


def _stochastic_round(x: float, rng: np.random.Generator) -> int:
    lo = math.floor(x)
    frac = x - lo
    if frac > 0 and rng.random() < frac:
        lo += 1
    return lo


def initialize(initial_state: SparseKet, n: int, n_diag: int,
               rng: np.random.Generator) -> Population:
    """Distribute ~n_diag signed walkers to represent vec(|psi><psi|).

    Real and imaginary parts of each target value n_diag * psi_i conj(psi_j)
    are rounded with floor + Bernoulli(frac), so the expected counts equal
    the target exactly.
    """
    counts: Counts = {}
    items = sorted(initial_state.items())
    for i, psi_i in items:
        for j, psi_j in items:
            v = n_diag * psi_i * np.conj(psi_j)
            a = _stochastic_round(v.real, rng)
            b = _stochastic_round(v.imag, rng)
            if a or b:
                counts[Location(i, j)] = complex(a, b)
    return Population(n=n, counts=counts, n_diag_initial=n_diag)


def _sgn(x: float) -> int:
    return 1 if x > 0 else -1


def spawn(pop: Population, oracle: ColumnOracle, dt: float, weight: float,
          initiator_xi: float, streams: SpawnStreams) -> Counts:
    """One stochastic application of weight * dt * L to the population.

    For each occupied location, the real and imaginary parent subpopulations
    each draw Binomial(m, p_sp) spawn events; events are distributed over the
    (target, Re/Im) channels by a multinomial in proportion to |Re L_vu| and
    |Im L_vu|.  Spawned signs follow parent sign x channel sign x (i for
    imaginary channels) x sgn(weight).  With initiator_xi = 0 the buffer is
    an unbiased sample of weight * dt * L . counts.

    Spawns onto unoccupied locations are discarded when the parent magnitude
    is below initiator_xi * n_diag_initial (initiator approximation).
    """
    buffer: Counts = {}
    if dt == 0 or weight == 0:
        return buffer
    wsign = _sgn(weight)
    wmag = abs(weight)
    threshold = initiator_xi * pop.n_diag_initial
    for loc, c in pop.counts.items():
        table = oracle.spawn_table(loc)
        if not table.targets:
            continue
        targets, signs, wtot, probs = table
        p_sp = wmag * dt * wtot
        if p_sp > 1.0:
            raise StepSizeError(loc, p_sp)
        m_re = int(abs(c.real))
        m_im = int(abs(c.imag))
        gen = None
        for m, parent_sign in ((m_re, _sgn(c.real)), (m_im, 1j * _sgn(c.imag))):
            if m == 0:
                continue
            if gen is None:
                gen = streams.for_location(loc.row, loc.col)
            n_sp = gen.binomial(m, p_sp)
            if n_sp == 0:
                continue
            if probs is None:
                counts_per_channel = (int(n_sp),)
            else:
                counts_per_channel = gen.multinomial(n_sp, probs)
            factor = parent_sign * wsign
            discard = m_re + m_im < threshold
            for tgt, s, k in zip(targets, signs, counts_per_channel):
                if k == 0:
                    continue
                if discard and tgt not in pop.counts:
                    continue
                val = int(k) * factor * s
                prev = buffer.get(tgt)
                new = val if prev is None else prev + val
                if new == 0:
                    buffer.pop(tgt, None)
                else:
                    buffer[tgt] = new
    return buffer


def merge(pop: Population, *buffers: Counts) -> Population:
    """Gaussian-integer addition per location; zero counts are removed.

    Opposite-sign walkers at the same location annihilate here, so the
    total walker count never exceeds the pre-merge sum.
    """
    counts = dict(pop.counts)
    for buf in buffers:
        for loc, val in buf.items():
            new = counts.get(loc, 0) + val
            if new == 0:
                counts.pop(loc, None)
            else:
                counts[loc] = new
    return Population(n=pop.n, counts=counts, n_diag_initial=pop.n_diag_initial)


def stats(pop: Population, t: float) -> PopulationStats:
    """Walker diagnostics: totals, diagonal sums, and the sign-phase angle."""
    re_nd = 0
    im_nd = 0
    n_tot = 0
    for loc, c in pop.counts.items():
        n_tot += int(abs(c.real)) + int(abs(c.imag))
        if loc.row == loc.col:
            re_nd += int(c.real)
            im_nd += int(c.imag)
    degenerate = re_nd == 0
    if degenerate:
        theta = math.copysign(math.pi / 2, im_nd) if im_nd else 0.0
    else:
        theta = math.atan(im_nd / re_nd)
    return PopulationStats(
        t=t, n_tot=n_tot, re_ndiag=re_nd, im_ndiag=im_nd, theta=theta,
        dim_occupied=pop.dim_occupied, theta_degenerate=degenerate,
    )


def dump_snapshot(pop: Population, t: float, path) -> None:
    """Write a population snapshot: header (n, n_diag, t) plus i j a b rows."""
    with open(path, "w") as f:
        f.write(f"# n={pop.n} n_diag={pop.n_diag_initial} t={t!r}\n")
        for loc in sorted(pop.counts):
            c = pop.counts[loc]
            f.write(f"{loc.row} {loc.col} {int(c.real)} {int(c.imag)}\n")


def load_snapshot(path) -> tuple[Population, float]:
    with open(path) as f:
        header = f.readline()
        fields = dict(kv.split("=") for kv in header.lstrip("# ").split())
        counts: Counts = {}
        for line in f:
            i, j, a, b = line.split()
            counts[Location(int(i), int(j))] = complex(int(a), int(b))
    pop = Population(n=int(fields["n"]), counts=counts,
                     n_diag_initial=int(fields["n_diag"]))
    return pop, float(fields["t"])


def anti_hermiticity(pops: list[Population], n_diag_eff: int,
                     n_samples: int = 1) -> float:
    """Frobenius norm of the anti-Hermitian part of the averaged estimate.

    The estimate is sum(counts) / (n_samples * n_diag_eff); the norm is
    computed sparsely by pairing each (i, j) with its (j, i) partner.
    """
    if not pops:
        raise ValueError("need at least one population")
    acc: Counts = {}
    for pop in pops:
        for loc, c in pop.counts.items():
            acc[loc] = acc.get(loc, 0) + c
    norm = n_samples * n_diag_eff
    sq = 0.0
    support = set(acc) | {Location(loc.col, loc.row) for loc in acc}
    for loc in support:
        c = acc.get(loc, 0)
        partner = acc.get(Location(loc.col, loc.row), 0)
        d = (c - np.conj(partner)) / norm
        sq += abs(d) ** 2
    return math.sqrt(sq)
