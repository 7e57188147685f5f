import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from src.core.errors import EmptyInputError, InvalidParameterError, RankDeficiencyError
from src.models.phase_space import HusimiGrid
from src.services.husimi import (
    coherent_state,
    grid_axis,
    grid_distance,
    husimi_map,
    orthonormal_subspace_basis,
    pt_transform_grid,
    region_enrichment,
    subspace_grid,
)
from src.services.operators import parity_apply
from src.services.spectra import classify, eigendecompose


def random_state(rng, dim):
    psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return psi / np.linalg.norm(psi)


class TestCoherentStates:
    def test_normalized(self):
        state = coherent_state(32, 0.3, 0.7)
        assert state.M == 32
        assert np.linalg.norm(state.amplitudes) == pytest.approx(1.0)

    def test_translation_by_one_site(self):
        M = 24
        a = coherent_state(M, 0.2 + 1.0 / M, 0.35).amplitudes
        b = np.roll(coherent_state(M, 0.2, 0.35).amplitudes, 1)
        assert abs(np.vdot(a, b)) == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("M", [16, 32])
    def test_distant_states_are_nearly_orthogonal(self, M):
        a = coherent_state(M, 0.1, 0.4).amplitudes
        b = coherent_state(M, 0.6, 0.4).amplitudes
        assert abs(np.vdot(a, b)) ** 2 < 10 * np.exp(-np.pi * M / 4)

    def test_cell_centred_axis(self):
        assert_allclose(grid_axis(4), [0.125, 0.375, 0.625, 0.875])


class TestOrthonormalBasis:
    def test_two_overlapping_vectors(self):
        e1 = np.zeros(6, dtype=np.complex128)
        e1[0] = 1.0
        v = np.zeros(6, dtype=np.complex128)
        v[:2] = 1.0 / np.sqrt(2.0)
        Q = orthonormal_subspace_basis([e1, v])
        assert_allclose(Q.conj().T @ Q, np.eye(2), atol=1e-14)
        assert_allclose(Q @ Q.conj().T, np.diag([1, 1, 0, 0, 0, 0]), atol=1e-14)

    def test_dependent_vectors(self, rng):
        v = random_state(rng, 8)
        with pytest.raises(RankDeficiencyError) as excinfo:
            orthonormal_subspace_basis([v, 2j * v])
        assert excinfo.value.rank == 1

    def test_empty_inputs(self):
        assert orthonormal_subspace_basis(np.zeros((8, 0), dtype=np.complex128)).shape == (8, 0)
        with pytest.raises(EmptyInputError):
            orthonormal_subspace_basis([])


class TestHusimiMap:
    def test_mass_equals_subspace_dimension(self, rng):
        M, K = 20, 3
        raw = rng.standard_normal((2 * M, K)) + 1j * rng.standard_normal((2 * M, K))
        basis = orthonormal_subspace_basis(raw)
        grid = husimi_map(basis, M, (60, 60))
        assert grid.normalized_mass(M) == pytest.approx(K, rel=1e-10)
        assert np.all(grid.values_L >= 0)

    def test_empty_basis_gives_zero_grid(self):
        grid = husimi_map(np.zeros((20, 0), dtype=np.complex128), 10, (8, 8))
        assert grid.mass_L == 0.0
        assert grid.mass_R == 0.0

    def test_threads_do_not_change_the_result(self, rng):
        basis = orthonormal_subspace_basis(
            rng.standard_normal((30, 2)) + 1j * rng.standard_normal((30, 2))
        )
        serial = husimi_map(basis, 15, (30, 20))
        threaded = husimi_map(basis, 15, (30, 20), workers=4)
        assert_array_equal(serial.values_L, threaded.values_L)
        assert_array_equal(serial.values_R, threaded.values_R)

    def test_pt_image_of_a_state(self, rng):
        M = 12
        psi = random_state(rng, 2 * M)
        image = parity_apply(psi.conj())
        direct = husimi_map(image, M, (24, 24))
        transformed = pt_transform_grid(husimi_map(psi, M, (24, 24)))
        assert_allclose(direct.values_L, transformed.values_L, atol=1e-12)
        assert_allclose(direct.values_R, transformed.values_R, atol=1e-12)

    def test_rejects_bad_shapes(self):
        with pytest.raises(InvalidParameterError):
            husimi_map(np.zeros((10, 1)), 4, (5, 5))
        with pytest.raises(InvalidParameterError):
            husimi_map(np.zeros((8, 1)), 4, (0, 5))


class TestSubspaces:
    def test_pt_mirror_of_amplified_and_decaying_supports(self, kr_params, kr_map):
        spec = eigendecompose(kr_map, want_vectors=True)
        classes = classify(spec, kr_params.mu)
        M = kr_params.M
        amplified = subspace_grid(spec, classes.amplified, M, (50, 50))
        decaying = subspace_grid(spec, classes.decaying, M, (50, 50))
        neutral = subspace_grid(spec, classes.neutral, M, (50, 50))
        assert grid_distance(decaying, pt_transform_grid(amplified)) < 0.05
        assert grid_distance(neutral, pt_transform_grid(neutral)) < 0.05
        assert amplified.normalized_mass(M) == pytest.approx(classes.amplified.size, rel=1e-8)

    def test_requires_eigenvectors(self, kr_map):
        with pytest.raises(InvalidParameterError):
            subspace_grid(eigendecompose(kr_map), [0], 50, (10, 10))


class TestGridComparisons:
    def test_distance(self):
        a = HusimiGrid(values_L=np.ones((2, 2)), values_R=np.zeros((2, 2)))
        b = HusimiGrid(values_L=np.ones((2, 2)), values_R=np.ones((2, 2)))
        assert grid_distance(a, a) == 0.0
        assert grid_distance(a, b) == pytest.approx(0.5)

    def test_enrichment(self):
        values = np.zeros((4, 4))
        values[0, :2] = 1.0
        region = np.zeros((4, 4), dtype=bool)
        region[0] = True
        assert region_enrichment(values, region) == pytest.approx(4.0)
        assert region_enrichment(np.ones((4, 4)), region) == pytest.approx(1.0)
        with pytest.raises(EmptyInputError):
            region_enrichment(values, np.zeros((4, 4), dtype=bool))
