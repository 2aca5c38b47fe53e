import math

import numpy as np
import pytest

from lindqmc import operators as ops
from lindqmc.estimators import (
    EstimatorError,
    ObservableSpec,
    bootstrap_ci,
    bootstrap_ci_complex,
    error_bound,
    estimate,
    population_value,
    scalarize,
    vec_value,
)
from lindqmc.liouvillian import ColumnOracle, LindbladChannel, Location
from lindqmc.operators import SIGMA_MINUS
from lindqmc.walkers import Population


TRACE = ObservableSpec("trace", "trace")
RHO01 = ObservableSpec("matrix_element", "rho01", target_location=Location(0, 1))
BELL = ObservableSpec("fidelity_to_state", "bell",
                      target_state={0: 2 ** -0.5, 3: 2 ** -0.5})


def make_pop(counts, n=2, n_diag=100):
    return Population(n=n, counts=counts, n_diag_initial=n_diag)


class TestSpecs:
    def test_unknown_kind_rejected(self):
        with pytest.raises(EstimatorError):
            ObservableSpec("variance")

    def test_fidelity_needs_normalized_state(self):
        with pytest.raises(EstimatorError):
            ObservableSpec("fidelity_to_state", target_state={0: 0.5})

    def test_matrix_element_needs_location(self):
        with pytest.raises(EstimatorError):
            ObservableSpec("matrix_element")


class TestValues:
    def test_trace_example(self):
        pop = make_pop({Location(0, 0): 60 + 0j, Location(3, 3): 50 + 0j,
                        Location(0, 1): 40 + 0j})
        assert population_value(pop, TRACE, 100) == pytest.approx(1.1)

    def test_matrix_element(self):
        pop = make_pop({Location(0, 1): 40 - 10j})
        assert population_value(pop, RHO01, 100) == pytest.approx(0.4 - 0.1j)
        assert population_value(pop, TRACE, 100) == 0

    def test_bell_fidelity(self):
        counts = {Location(0, 0): 50 + 0j, Location(3, 3): 50 + 0j,
                  Location(0, 3): 50 + 0j, Location(3, 0): 50 + 0j}
        pop = make_pop(counts)
        assert population_value(pop, BELL, 100) == pytest.approx(1.0)

    def test_vec_value_matches_population_value(self):
        rng = np.random.default_rng(0)
        dim = 4
        counts = {}
        vec = np.zeros(dim * dim, dtype=complex)
        for i in range(dim):
            for j in range(dim):
                c = complex(*rng.integers(-50, 50, size=2))
                counts[Location(i, j)] = c
                vec[i + dim * j] = c / 100
        pop = make_pop(counts)
        for spec in (TRACE, RHO01, BELL):
            assert population_value(pop, spec, 100) == pytest.approx(
                vec_value(vec, spec, dim))

    def test_scalarize(self):
        assert scalarize(BELL, 3 + 4j) == pytest.approx(5.0)
        assert scalarize(TRACE, 3 + 4j) == pytest.approx(3.0)


class TestEstimate:
    def test_replica_mean_identity(self):
        pops = [make_pop({Location(0, 0): c}) for c in (80, 120, 90, 110)]
        # 2 samples x 2 replicas averages the same as 4 samples x 1 replica
        assert estimate(pops, TRACE, 100, r=2) == pytest.approx(
            estimate(pops, TRACE, 100, r=1))
        assert estimate(pops, TRACE, 100, r=2) == pytest.approx(1.0)

    def test_replica_count_must_divide(self):
        pops = [make_pop({Location(0, 0): 100 + 0j})] * 3
        with pytest.raises(EstimatorError):
            estimate(pops, TRACE, 100, r=2)

    def test_mismatched_populations_rejected(self):
        pops = [make_pop({}, n=2), make_pop({}, n=3)]
        with pytest.raises(EstimatorError):
            estimate(pops, TRACE, 100)


class TestBootstrap:
    def test_deterministic_given_rng(self):
        vals = [1.0, 2.0, 3.0, 4.0]
        a = bootstrap_ci(vals, 500, np.random.default_rng(0))
        b = bootstrap_ci(vals, 500, np.random.default_rng(0))
        assert a == b

    def test_brackets_the_mean(self):
        rng = np.random.default_rng(1)
        vals = list(rng.normal(5.0, 1.0, size=50))
        low, high = bootstrap_ci(vals, 2000, np.random.default_rng(2))
        assert low <= np.mean(vals) <= high
        assert high - low < 1.5

    def test_interval_shrinks_with_samples(self):
        rng = np.random.default_rng(3)
        small = list(rng.normal(0.0, 1.0, size=8))
        big = list(rng.normal(0.0, 1.0, size=128))
        lo_s, hi_s = bootstrap_ci(small, 2000, np.random.default_rng(4))
        lo_b, hi_b = bootstrap_ci(big, 2000, np.random.default_rng(4))
        assert hi_b - lo_b < hi_s - lo_s

    def test_needs_two_values(self):
        with pytest.raises(EstimatorError):
            bootstrap_ci([1.0], 100, np.random.default_rng(0))

    def test_complex_fidelity_uses_modulus(self):
        # values on the unit circle: every resample mean modulus stays near 1
        vals = [np.exp(1j * t) for t in (0.0, 0.05, -0.05, 0.02)]
        low, high = bootstrap_ci_complex(vals, 1000, np.random.default_rng(5), BELL)
        assert 0.99 <= low <= high <= 1.0

    def test_complex_real_part_for_elements(self):
        vals = [1 + 100j, 1 - 100j, 1 + 50j, 1 - 50j]
        low, high = bootstrap_ci_complex(vals, 1000, np.random.default_rng(6), RHO01)
        assert low == pytest.approx(1.0, abs=1e-9)
        assert high == pytest.approx(1.0, abs=1e-9)


class TestErrorBound:
    def test_closed_form_single_channel(self):
        gamma, dt = 0.25, 0.1
        ch = LindbladChannel.make(gamma, ops.model(1, ops.term(1.0, (0, SIGMA_MINUS))))
        oracle = ColumnOracle(1, None, [ch])
        pop = Population(n=1, counts={Location(1, 1): 50 + 0j}, n_diag_initial=100)
        # column at (1,1): gamma at (0,0), -gamma at (1,1) -> nnz=2, sq=2 gamma^2
        lam = dt * dt * 2 * 2 * gamma**2 + 0.25
        expected = lam * 2 * 50 / 100**2
        assert error_bound(pop, oracle, dt) == pytest.approx(expected)

    def test_empty_population(self):
        ch = LindbladChannel.make(0.1, ops.model(1, ops.term(1.0, (0, SIGMA_MINUS))))
        oracle = ColumnOracle(1, None, [ch])
        pop = Population(n=1, counts={}, n_diag_initial=100)
        assert error_bound(pop, oracle, 0.1) == 0.0
