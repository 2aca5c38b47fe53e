import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lindqmc import operators as ops, walkers
from lindqmc.liouvillian import ColumnOracle, LindbladChannel, Location, dense_liouvillian, vec_index
from lindqmc.operators import SIGMA_MINUS, SIGMA_X
from lindqmc.rng import SpawnStreams
from lindqmc.walkers import (
    Population,
    StepSizeError,
    anti_hermiticity,
    dump_snapshot,
    initialize,
    load_snapshot,
    merge,
    spawn,
    stats,
)


def one_qubit_oracle(gamma=0.01, omega=np.pi / 20):
    h = ops.model(1, ops.term(omega, (0, SIGMA_X)))
    ch = LindbladChannel.make(gamma, ops.model(1, ops.term(1.0, (0, SIGMA_MINUS))))
    return h, [ch], ColumnOracle(1, h, [ch])


class SingleEntryOracle:
    """Column oracle stub emitting one fixed amplitude, for sign-algebra tests."""

    def __init__(self, target, amplitude):
        self.target = target
        self.amplitude = amplitude

    def column(self, source):
        return [(self.target, self.amplitude)]

    def spawn_table(self, source):
        from lindqmc.liouvillian import build_spawn_table
        return build_spawn_table(self.column(source))


class TestInitialize:
    def test_ground_state_deterministic(self):
        pop = initialize({0: 1.0 + 0j}, 2, 1000, np.random.default_rng(0))
        assert pop.counts == {Location(0, 0): 1000 + 0j}
        assert pop.n_tot == 1000

    def test_plus_state_exact_quarters(self):
        pop = initialize({0: 2 ** -0.5, 1: 2 ** -0.5}, 1, 1000, np.random.default_rng(0))
        locs = {Location(i, j) for i in (0, 1) for j in (0, 1)}
        assert set(pop.counts) == locs
        for loc in locs:
            assert pop.counts[loc] == 500 + 0j

    def test_w3_thirds_in_expectation(self):
        psi = {1: 3 ** -0.5, 2: 3 ** -0.5, 4: 3 ** -0.5}
        rng = np.random.default_rng(1)
        totals = {}
        reps = 400
        for _ in range(reps):
            pop = initialize(psi, 3, 100, rng)
            for loc, c in pop.counts.items():
                totals[loc] = totals.get(loc, 0) + c
        for loc, total in totals.items():
            # target 100/3 per location; Bernoulli rounding SE ~ 0.5/sqrt(reps)
            assert total.real / reps == pytest.approx(100 / 3, abs=0.15)
            assert total.imag == 0

    def test_complex_amplitudes_round_both_parts(self):
        psi = {0: 2 ** -0.5, 1: 1j * 2 ** -0.5}
        pop = initialize(psi, 1, 100, np.random.default_rng(2))
        assert pop.counts[Location(0, 1)] == -50j
        assert pop.counts[Location(1, 0)] == 50j


class TestSpawnSignAlgebra:
    @pytest.mark.parametrize("parent,amp,weight,expected_sign", [
        (4 + 0j, 0.5, 1.0, 1),        # +Re parent, +Re amp
        (-4 + 0j, 0.5, 1.0, -1),      # -Re parent
        (4 + 0j, -0.5, 1.0, -1),      # -Re amp
        (4 + 0j, 0.5, -1.0, -1),      # negative weight
        (4j, 0.5, 1.0, 1j),           # +Im parent picks up i
        (-4j, 0.5, 1.0, -1j),
        (4 + 0j, 0.5j, 1.0, 1j),      # +Im amp picks up i
        (4j, 0.5j, 1.0, -1),          # i * i = -1
        (-4j, -0.5j, -1.0, 1),        # parent -i, channel i*(-1)*(-1)... = +1 net
    ])
    def test_deterministic_channel(self, parent, amp, weight, expected_sign):
        # dt * |amp| * |weight| = 1 makes every parent spawn exactly once
        oracle = SingleEntryOracle(Location(1, 0), amp)
        pop = Population(n=1, counts={Location(0, 0): parent}, n_diag_initial=4)
        buf = spawn(pop, oracle, dt=1.0 / (abs(amp) * abs(weight)), weight=weight,
                    initiator_xi=0.0, streams=SpawnStreams(9, 0, 0))
        assert buf == {Location(1, 0): 4 * expected_sign}

    def test_step_size_guard(self):
        oracle = SingleEntryOracle(Location(1, 0), 2.0)
        pop = Population(n=1, counts={Location(0, 0): 1 + 0j}, n_diag_initial=1)
        with pytest.raises(StepSizeError):
            spawn(pop, oracle, dt=1.0, weight=1.0, initiator_xi=0.0,
                  streams=SpawnStreams(9, 0, 0))


class TestSpawnUnbiased:
    def test_expectation_matches_generator(self):
        h, channels, oracle = one_qubit_oracle()
        dense = dense_liouvillian(h, channels, 1)
        counts = {Location(1, 1): 50 + 30j, Location(0, 1): -20 + 0j}
        pop = Population(n=1, counts=counts, n_diag_initial=100)
        dt, weight = 0.5, -1.5

        vec = np.zeros(4, dtype=complex)
        for loc, c in counts.items():
            vec[vec_index(loc, 2)] = c
        expected = weight * dt * (dense @ vec)

        reps = 10_000
        acc = np.zeros(4, dtype=complex)
        sumsq = np.zeros(4)
        for k in range(reps):
            buf = spawn(pop, oracle, dt, weight, 0.0, SpawnStreams(123, k, 0))
            v = np.zeros(4, dtype=complex)
            for loc, c in buf.items():
                v[vec_index(loc, 2)] = c
            acc += v
            sumsq += np.abs(v - expected) ** 2
        mean = acc / reps
        se = np.sqrt(sumsq / reps / reps) + 1e-12
        assert np.all(np.abs(mean - expected) <= 5 * se)

    def test_zero_dt_or_weight_is_empty(self):
        _, _, oracle = one_qubit_oracle()
        pop = Population(n=1, counts={Location(0, 0): 5 + 0j}, n_diag_initial=5)
        assert spawn(pop, oracle, 0.0, 1.0, 0.0, SpawnStreams(1, 0, 0)) == {}
        assert spawn(pop, oracle, 0.1, 0.0, 0.0, SpawnStreams(1, 0, 0)) == {}


class TestSpawnDeterminism:
    def test_same_streams_same_buffer(self):
        _, _, oracle = one_qubit_oracle()
        counts = {Location(1, 1): 40 + 0j, Location(0, 1): 7 - 3j}
        pop = Population(n=1, counts=counts, n_diag_initial=40)
        a = spawn(pop, oracle, 0.5, 1.0, 0.0, SpawnStreams(77, 5, 1))
        b = spawn(pop, oracle, 0.5, 1.0, 0.0, SpawnStreams(77, 5, 1))
        assert a == b

    def test_insertion_order_irrelevant(self):
        _, _, oracle = one_qubit_oracle()
        items = [(Location(1, 1), 40 + 0j), (Location(0, 1), 7 - 3j),
                 (Location(1, 0), -6 + 0j)]
        pop1 = Population(n=1, counts=dict(items), n_diag_initial=40)
        pop2 = Population(n=1, counts=dict(reversed(items)), n_diag_initial=40)
        s = SpawnStreams(77, 5, 0)
        assert spawn(pop1, oracle, 0.5, 1.0, 0.0, s) == spawn(pop2, oracle, 0.5, 1.0, 0.0, s)


class TestInitiator:
    def test_small_parent_cannot_open_new_location(self):
        oracle = SingleEntryOracle(Location(1, 0), 1.0)
        pop = Population(n=1, counts={Location(0, 0): 2 + 0j}, n_diag_initial=1000)
        buf = spawn(pop, oracle, 1.0, 1.0, initiator_xi=0.01,
                    streams=SpawnStreams(3, 0, 0))
        assert buf == {}

    def test_small_parent_feeds_occupied_location(self):
        oracle = SingleEntryOracle(Location(1, 0), 1.0)
        counts = {Location(0, 0): 2 + 0j, Location(1, 0): 1 + 0j}
        pop = Population(n=1, counts=counts, n_diag_initial=1000)
        buf = spawn(pop, oracle, 1.0, 1.0, initiator_xi=0.01,
                    streams=SpawnStreams(3, 0, 0))
        assert buf.get(Location(1, 0)) == 3 + 0j  # parents at both locations spawn

    def test_large_parent_opens_new_location(self):
        oracle = SingleEntryOracle(Location(1, 0), 1.0)
        pop = Population(n=1, counts={Location(0, 0): 20 + 0j}, n_diag_initial=1000)
        buf = spawn(pop, oracle, 1.0, 1.0, initiator_xi=0.01,
                    streams=SpawnStreams(3, 0, 0))
        assert buf == {Location(1, 0): 20 + 0j}


small_counts = st.dictionaries(
    st.tuples(st.integers(0, 3), st.integers(0, 3)).map(lambda t: Location(*t)),
    st.builds(complex, st.integers(-5, 5), st.integers(-5, 5)).filter(lambda c: c != 0),
    max_size=8,
)


class TestMerge:
    def test_annihilation_example(self):
        pop = Population(n=1, counts={Location(0, 0): 3 + 2j})
        merged = merge(pop, {Location(0, 0): -3 + 0j, Location(1, 1): 1 + 0j})
        assert merged.counts == {Location(0, 0): 2j, Location(1, 1): 1 + 0j}

    def test_exact_cancellation_removes_location(self):
        pop = Population(n=1, counts={Location(0, 0): 3 + 0j})
        merged = merge(pop, {Location(0, 0): -3 + 0j})
        assert merged.counts == {}

    @settings(max_examples=100, deadline=None)
    @given(a=small_counts, b=small_counts, c=small_counts)
    def test_never_exceeds_presum_and_is_exact(self, a, b, c):
        pop = Population(n=2, counts=dict(a))
        merged = merge(pop, b, c)
        presum = (Population(n=2, counts=a).n_tot
                  + Population(n=2, counts=b).n_tot
                  + Population(n=2, counts=c).n_tot)
        assert merged.n_tot <= presum
        support = set(a) | set(b) | set(c)
        for loc in support:
            total = a.get(loc, 0) + b.get(loc, 0) + c.get(loc, 0)
            assert merged.counts.get(loc, 0) == total
        assert 0 not in merged.counts.values()

    @settings(max_examples=60, deadline=None)
    @given(a=small_counts, b=small_counts)
    def test_buffer_order_irrelevant(self, a, b):
        pop = Population(n=2, counts={})
        assert merge(pop, a, b).counts == merge(pop, b, a).counts


class TestStats:
    def test_frozen_example(self):
        counts = {Location(0, 0): 60 + 1j, Location(1, 1): 40 + 1j,
                  Location(0, 1): -5 + 5j}
        s = stats(Population(n=1, counts=counts), t=2.5)
        assert s.t == 2.5
        assert s.re_ndiag == 100
        assert s.im_ndiag == 2
        assert s.n_tot == 60 + 1 + 40 + 1 + 5 + 5
        assert s.dim_occupied == 3
        assert s.theta == pytest.approx(math.atan(0.02))
        assert s.theta == pytest.approx(0.019997, abs=1e-6)
        assert not s.theta_degenerate

    def test_degenerate_diagonal(self):
        s = stats(Population(n=1, counts={Location(0, 0): 5j}), t=0.0)
        assert s.theta_degenerate
        assert s.theta == pytest.approx(math.pi / 2)
        s2 = stats(Population(n=1, counts={Location(0, 1): 3 + 0j}), t=0.0)
        assert s2.theta_degenerate
        assert s2.theta == 0.0


class TestSnapshots:
    def test_roundtrip(self, tmp_path):
        counts = {Location(0, 0): 60 - 2j, Location(2, 1): -5 + 0j}
        pop = Population(n=2, counts=counts, n_diag_initial=64)
        path = tmp_path / "snap.txt"
        dump_snapshot(pop, 12.5, path)
        loaded, t = load_snapshot(path)
        assert t == 12.5
        assert loaded.n == 2
        assert loaded.n_diag_initial == 64
        assert loaded.counts == counts

    def test_sorted_rows_byte_stable(self, tmp_path):
        items = [(Location(1, 1), 2 + 0j), (Location(0, 0), 1 + 0j)]
        p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
        dump_snapshot(Population(n=1, counts=dict(items)), 0.0, p1)
        dump_snapshot(Population(n=1, counts=dict(reversed(items))), 0.0, p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestAntiHermiticity:
    def test_hermitian_population_is_zero(self):
        counts = {Location(0, 0): 10 + 0j, Location(0, 1): 2 + 3j,
                  Location(1, 0): 2 - 3j}
        assert anti_hermiticity([Population(n=1, counts=counts)], 10) == 0.0

    def test_lone_coherence_sqrt_two(self):
        counts = {Location(0, 1): 1 + 0j}
        val = anti_hermiticity([Population(n=1, counts=counts)], 1)
        assert val == pytest.approx(math.sqrt(2))

    def test_averages_over_populations(self):
        a = Population(n=1, counts={Location(0, 1): 1 + 0j})
        b = Population(n=1, counts={Location(1, 0): 1 + 0j})
        assert anti_hermiticity([a, b], 1, n_samples=2) == pytest.approx(0.0)

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            anti_hermiticity([], 1)
