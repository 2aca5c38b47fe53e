import math

import numpy as np
import pytest
from scipy.linalg import expm

from lindqmc import redfield
from lindqmc.liouvillian import dense_liouvillian
from lindqmc.operators import OperatorModel
from lindqmc.redfield import (
    RedfieldParams,
    build_model,
    build_schedule,
    frequency_matrix,
    initial_state,
    rates,
    rotated_element_specs,
)

FIG_PARAMS = RedfieldParams(omega1=0.25, omega2=0.5, gamma1=1.0, gamma2=4.0,
                            alpha=3.0, kappa=1.0)


def lab_liouvillian(model):
    """Independent dense generator in the lab frame (verbatim vectorization)."""
    from lindqmc import operators as ops
    k = ops.dense_matrix(model.lab_hamiltonian)
    eye = np.eye(4)
    out = -1j * np.kron(eye, k) + 1j * np.kron(k.T, eye)
    for lam, l in zip(model.rates, model.lab_jumps):
        ldl = l.conj().T @ l
        out += 0.5 * lam * (2 * np.kron(l.conj(), l)
                            - np.kron(eye, ldl) - np.kron(ldl.T, eye))
    return out


def rotated_liouvillian(model):
    return dense_liouvillian(model.hamiltonian, list(model.channels), 2)


class TestRates:
    def test_reference_parameters_to_four_decimals(self):
        lam = rates(FIG_PARAMS)
        assert lam[0] == pytest.approx(-0.5178, abs=5e-5)
        assert lam[1] == pytest.approx(3.0178, abs=5e-5)

    def test_symmetric_no_coupling(self):
        p = RedfieldParams(1.0, 1.0, 2.0, 2.0, 0.0, 0.0)
        assert rates(p) == pytest.approx((0.0, 2.0))

    def test_closed_form_matches_diagonalization(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            g1, g2 = rng.uniform(0, 5, size=2)
            kappa = rng.uniform(-3, 3)
            p = RedfieldParams(0.0, 0.0, g1, g2, 0.0, kappa)
            c = (g1 + g2) / 4 + 1j * kappa
            mat = np.array([[g1 / 2, c], [np.conj(c), g2 / 2]])
            np.testing.assert_allclose(rates(p), np.linalg.eigvalsh(mat), atol=1e-10)

    def test_negative_gamma_rejected(self):
        with pytest.raises(ValueError):
            RedfieldParams(0.0, 0.0, -1.0, 1.0, 0.0, 0.0)


class TestFrequencyMatrix:
    def test_reference_parameters(self):
        a = frequency_matrix(FIG_PARAMS)
        np.testing.assert_allclose(
            a, [[3.25, 3.5 + 0.375j], [3.5 - 0.375j, 4.5]], atol=1e-12
        )


class TestModel:
    def test_rotation_is_unitary(self):
        m = build_model(FIG_PARAMS)
        np.testing.assert_allclose(
            m.rotation.conj().T @ m.rotation, np.eye(4), atol=1e-10
        )

    def test_first_rate_negative_for_reference(self):
        m = build_model(FIG_PARAMS)
        assert m.rates[0] < 0 < m.rates[1]

    def test_trace_preserving_even_with_negative_rate(self):
        gen = rotated_liouvillian(build_model(FIG_PARAMS))
        diag_rows = [i + 4 * i for i in range(4)]
        np.testing.assert_allclose(gen[diag_rows, :].sum(axis=0),
                                   np.zeros(16), atol=1e-10)

    def test_rotated_frame_matches_lab_frame(self):
        m = build_model(FIG_PARAMS)
        v = m.rotation
        psi_rot = np.zeros(4, dtype=complex)
        for idx, amp in initial_state(m).items():
            psi_rot[idx] = amp
        psi_lab = v @ psi_rot
        rho_lab0 = np.outer(psi_lab, psi_lab.conj())
        rho_rot0 = np.outer(psi_rot, psi_rot.conj())
        for t in (0.3, 1.0, 2.0):
            lab_vec = expm(lab_liouvillian(m) * t) @ rho_lab0.reshape(-1, order="F")
            rot_vec = expm(rotated_liouvillian(m) * t) @ rho_rot0.reshape(-1, order="F")
            rho_lab = lab_vec.reshape((4, 4), order="F")
            np.testing.assert_allclose(
                v.conj().T @ rho_lab @ v, rot_vec.reshape((4, 4), order="F"),
                atol=1e-9,
            )

    def test_jump_rotation_consistency(self):
        from lindqmc import operators as ops
        m = build_model(FIG_PARAMS)
        v = m.rotation
        for ch, l_lab in zip(m.channels, m.lab_jumps):
            np.testing.assert_allclose(
                ops.dense_matrix(ch.jump), v.conj().T @ l_lab @ v, atol=1e-10
            )


class TestScheduleAndObservables:
    def test_initial_diagonal_thirds(self):
        m = build_model(FIG_PARAMS)
        psi = initial_state(m)
        rho = {(i, j): a * np.conj(b) for i, a in psi.items() for j, b in psi.items()}
        for k, spec in enumerate(rotated_element_specs(m)):
            loc = spec.target_location
            assert rho[(loc.row, loc.col)].real == pytest.approx(1 / 3)
            assert spec.name == f"rho{k}{k}"

    def test_schedule_shape(self):
        m = build_model(FIG_PARAMS)
        s = build_schedule(m, 2.0)
        assert s.n == 2
        assert s.total_duration == pytest.approx(2.0)
        assert s.basis == redfield.REDFIELD_ROTATED
        assert len(s.channels) == 2

    def test_zero_duration_schedule(self):
        m = build_model(FIG_PARAMS)
        assert build_schedule(m, 0.0).segments == ()

    def test_exact_diagonals_stay_physical(self):
        from lindqmc.stepper import exact_evolve
        m = build_model(FIG_PARAMS)
        s = build_schedule(m, 2.0)
        results = exact_evolve(s, [0.5, 1.0, 2.0], dt_override=0.0005)
        for _, vec in results:
            trace = sum(vec[i + 4 * i] for i in range(4))
            assert trace.real == pytest.approx(1.0, abs=1e-6)
