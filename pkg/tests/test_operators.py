import cmath

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from src.core.errors import InvalidParameterError
from src.models.system import COEDynamics, KickedRotatorDynamics, SystemParams
from src.services.operators import (
    assemble_pt_map,
    build_coupling,
    build_internal_dynamics,
    build_kicked_rotator,
    build_pt_map,
    critical_mu,
    join_state,
    parity_apply,
    parity_matrix,
    pt_relation_residual,
    sample_coe,
    split_state,
    unitarity_residual,
)


class TestKickedRotator:
    def test_unitary_and_exactly_symmetric(self):
        F = build_kicked_rotator(50, 8.0)
        assert unitarity_residual(F) < 1e-12
        assert_array_equal(F, F.T)

    def test_single_state_is_a_phase(self):
        F = build_kicked_rotator(1, 8.0)
        assert F.shape == (1, 1)
        assert abs(abs(F[0, 0]) - 1.0) < 1e-14

    def test_free_rotation_entries(self):
        # k = 0 leaves the Gaussian-sum kernel (iM)^{-1/2} exp(i pi d^2 / M)
        M = 7
        F = build_kicked_rotator(M, 0.0)
        m = np.arange(M)
        d = m[:, None] - m[None, :]
        expected = np.exp(1j * np.pi * d**2 / M) / np.sqrt(1j * M)
        assert_allclose(F, expected, atol=1e-13)

    def test_single_state_without_kick(self):
        F = build_kicked_rotator(1, 0.0)
        assert_allclose(F, [[np.exp(-1j * np.pi / 4)]], rtol=0, atol=1e-15)

    def test_kicked_entries_match_scalar_formula(self):
        M, k = 3, 8.0
        F = build_kicked_rotator(M, k)
        for m in range(M):
            for n in range(M):
                phase = np.pi * (m - n) ** 2 / M - (M * k / (4 * np.pi)) * (
                    np.cos(2 * np.pi * m / M) + np.cos(2 * np.pi * n / M)
                )
                expected = cmath.exp(1j * phase) / cmath.sqrt(1j * M)
                assert abs(F[m, n] - expected) < 1e-15

    def test_rejects_empty_space(self):
        with pytest.raises(InvalidParameterError):
            build_kicked_rotator(0, 8.0)


class TestCOE:
    def test_symmetric_unitary(self):
        F = sample_coe(60, 3)
        assert_array_equal(F, F.T)
        assert unitarity_residual(F) < 1e-12

    def test_seeded_samples_reproduce(self):
        assert_array_equal(sample_coe(30, 11), sample_coe(30, 11))
        assert not np.allclose(sample_coe(30, 11), sample_coe(30, 12))

    def test_off_diagonal_variance(self):
        # E|F_01|^2 = 1/(M+1) for the circular orthogonal ensemble
        M = 20
        rng = np.random.default_rng(2024)
        mean = np.mean([abs(sample_coe(M, rng)[0, 1]) ** 2 for _ in range(200)])
        assert 0.5 / (M + 1) <= mean <= 2.0 / (M + 1)

    def test_dispatch_uses_params_seed(self, coe_params):
        F = build_internal_dynamics(coe_params)
        assert_array_equal(F, sample_coe(coe_params.M, np.random.default_rng(coe_params.seed)))


class TestCoupling:
    def test_square_root_squares_to_coupling(self):
        C, sqrtC = build_coupling(12, 3)
        assert_allclose(sqrtC @ sqrtC, C, atol=1e-14)
        assert unitarity_residual(C) < 1e-14
        assert unitarity_residual(sqrtC) < 1e-14

    def test_single_channel_closed_form(self):
        C, sqrtC = build_coupling(1, 1)
        s = 2**-0.5
        assert_allclose(sqrtC, [[s, -1j * s], [-1j * s, s]], rtol=0, atol=1e-16)
        assert_allclose(sqrtC @ sqrtC, [[0, -1j], [-1j, 0]], atol=1e-15)
        assert_array_equal(C, [[0, -1j], [-1j, 0]])

    def test_one_channel_of_five(self):
        C, _ = build_coupling(5, 1)
        off_diagonal = C[~np.eye(10, dtype=bool)]
        assert np.count_nonzero(off_diagonal) == 2
        assert C[0, 5] == -1j and C[5, 0] == -1j
        assert np.count_nonzero(np.diagonal(C)) == 8
        assert_array_equal(np.diagonal(C)[[1, 2, 3, 4, 6, 7, 8, 9]], 1.0)

    def test_full_coupling_swaps_halves(self):
        C, _ = build_coupling(4, 4)
        eye = np.eye(4)
        zero = np.zeros((4, 4))
        assert_allclose(C, np.block([[zero, -1j * eye], [-1j * eye, zero]]))

    @pytest.mark.parametrize("M,N", [(5, 6), (5, 0), (0, 0)])
    def test_rejects_bad_channel_counts(self, M, N):
        with pytest.raises(InvalidParameterError):
            build_coupling(M, N)


class TestAssembly:
    def test_unitary_at_zero_rate(self):
        params = SystemParams(M=40, N=8, mu=0.0, dynamics=KickedRotatorDynamics(k=8.0))
        assert unitarity_residual(build_pt_map(params)) < 1e-12

    def test_pt_relation_kicked_rotator(self):
        params = SystemParams(M=100, N=20, mu=0.4, dynamics=KickedRotatorDynamics(k=8.0))
        assert pt_relation_residual(build_pt_map(params)) < 1e-10

    def test_pt_relation_coe(self, coe_map):
        assert pt_relation_residual(coe_map) < 1e-10

    def test_gain_loss_scales_the_determinant(self):
        # det = det(e^-mu F) det(e^mu F^T) times unimodular factors
        _, sqrtC = build_coupling(10, 2)
        F = build_kicked_rotator(10, 8.0)
        pt_map = assemble_pt_map(F, 0.7, sqrtC)
        assert abs(abs(np.linalg.det(pt_map)) - 1.0) < 1e-10

    def test_rejects_dimension_mismatch(self):
        _, sqrtC = build_coupling(6, 2)
        with pytest.raises(InvalidParameterError):
            assemble_pt_map(build_kicked_rotator(5, 8.0), 0.1, sqrtC)

    def test_rejects_negative_rate(self):
        _, sqrtC = build_coupling(5, 1)
        with pytest.raises(InvalidParameterError):
            assemble_pt_map(build_kicked_rotator(5, 8.0), -0.1, sqrtC)

    def test_critical_rate(self):
        assert critical_mu(100, 20) == pytest.approx(np.sqrt(20) / 100)
        params = SystemParams(M=100, N=20, dynamics=COEDynamics())
        assert params.critical_mu == pytest.approx(critical_mu(100, 20))


class TestParity:
    def test_swaps_state_halves(self):
        psi = np.arange(6, dtype=np.complex128)
        assert_array_equal(parity_apply(psi), [3, 4, 5, 0, 1, 2])

    def test_matrix_conjugation_matches_explicit_operator(self, rng):
        A = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        P = parity_matrix(4)
        assert_allclose(parity_apply(A), P @ A @ P)

    def test_involution(self, kr_map):
        assert_array_equal(parity_apply(parity_apply(kr_map)), kr_map)

    def test_odd_dimension_rejected(self):
        with pytest.raises(InvalidParameterError):
            parity_apply(np.zeros(5))
        with pytest.raises(InvalidParameterError):
            split_state(np.zeros(7))

    def test_split_join(self):
        psi = np.arange(8, dtype=np.complex128)
        left, right = split_state(psi)
        assert_array_equal(left, psi[:4])
        assert_array_equal(join_state(left, right), psi)
        with pytest.raises(InvalidParameterError):
            join_state(left, right[:3])
