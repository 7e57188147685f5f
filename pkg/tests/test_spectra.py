import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from src.core.errors import (
    EigensolverError,
    EmptyInputError,
    FitError,
    InvalidParameterError,
    PTSymmetryViolation,
)
from src.models.system import KickedRotatorDynamics, SystemParams
from src.services.operators import assemble_pt_map, build_coupling, build_pt_map, sample_coe
from src.services.spectra import (
    classify,
    critical_mu_scan,
    eigendecompose,
    ensemble_fraction,
    estimate_fractal_dimension,
    fit_power_law,
    fraction_amplified,
    fraction_curve,
    im_e_histogram,
    pair_match,
    quasienergies,
    real_state_fraction,
    spectral_identities,
    spectrum_from_eigenvalues,
)


def kr_map(M=50, mu=0.0, k=8.0):
    return build_pt_map(SystemParams(M=M, N=M // 5, mu=mu, dynamics=KickedRotatorDynamics(k=k)))


class TestQuasienergies:
    def test_conventions(self):
        E = quasienergies(np.array([1.0, -1.0, 1j, np.e * np.exp(-0.5j)]))
        assert_allclose(E.real, [0.0, np.pi, -np.pi / 2, 0.5], atol=1e-15)
        assert_allclose(E.imag, [0.0, 0.0, 0.0, 1.0], atol=1e-15)

    def test_growth_means_positive_imaginary_part(self):
        spec = spectrum_from_eigenvalues([1.5, 0.5])
        assert_allclose(spec.im_e, np.log([0.5, 1.5]))
        assert_allclose(spec.decay_rates, -2 * np.log([0.5, 1.5]))


class TestEigendecompose:
    def test_unitary_limit(self):
        spec = eigendecompose(kr_map(M=50, mu=0.0))
        assert spec.dimension == 100
        assert np.max(np.abs(np.abs(spec.lambdas) - 1.0)) < 1e-10
        assert spec.max_residual < 1e-10
        assert spec.eigenvectors is None

    def test_canonical_order_and_vectors(self, kr_map):
        spec = eigendecompose(kr_map, want_vectors=True)
        order = np.lexsort((spec.lambdas.imag, spec.lambdas.real))
        assert_array_equal(order, np.arange(spec.dimension))
        assert spec.eigenvectors.shape == (100, 100)
        assert_allclose(np.linalg.norm(spec.eigenvectors, axis=0), 1.0, atol=1e-12)
        residual = kr_map @ spec.eigenvectors - spec.eigenvectors * spec.lambdas
        assert np.max(np.linalg.norm(residual, axis=0)) < 1e-9

    def test_trace_and_determinant_identities(self, kr_map, coe_map):
        for pt_map in (kr_map, coe_map):
            identities = spectral_identities(eigendecompose(pt_map), pt_map)
            assert identities.trace_rel_error < 1e-8
            assert identities.det_modulus_error < 1e-8
            assert identities.log_det_error < 1e-8

    def test_solver_failure_is_wrapped(self, mocker, kr_map):
        from scipy import linalg

        mocker.patch.object(linalg, "eig", side_effect=linalg.LinAlgError("no convergence"))
        with pytest.raises(EigensolverError) as excinfo:
            eigendecompose(kr_map)
        assert excinfo.value.descriptor["shape"] == (100, 100)

    def test_channel_relabeling_keeps_the_spectrum(self, rng):
        M, N = 20, 4
        F = sample_coe(M, 5)
        # permutes channels among themselves and the closed states among themselves
        perm = np.concatenate([rng.permutation(N), N + rng.permutation(M - N)])
        _, sqrtC = build_coupling(M, N)
        original = eigendecompose(assemble_pt_map(F, 0.3, sqrtC)).lambdas
        relabeled = eigendecompose(assemble_pt_map(F[np.ix_(perm, perm)], 0.3, sqrtC)).lambdas
        gaps = np.abs(original[:, None] - relabeled[None, :])
        assert gaps.min(axis=1).max() < 1e-9
        assert gaps.min(axis=0).max() < 1e-9

    def test_rejects_non_finite(self):
        with pytest.raises(InvalidParameterError):
            eigendecompose(np.array([[np.nan, 0], [0, 1]]))


class TestPairMatch:
    def test_synthetic_pairs(self):
        partners = pair_match(np.array([2.0, 0.5, 1j]), 1e-12)
        assert_array_equal(partners, [1, 0, 2])

    @pytest.mark.parametrize("mu", [0.1, 0.2, 0.4, 1.0])
    def test_kicked_rotator_spectra_pair_completely(self, mu):
        spec = eigendecompose(kr_map(M=50, mu=mu))
        partners = pair_match(spec.lambdas, 1e-7 * max(1.0, np.max(np.abs(spec.lambdas))))
        assert np.all(partners >= 0)
        assert_array_equal(partners[partners], np.arange(spec.dimension))

    def test_coe_spectrum_pairs(self, coe_map):
        spec = eigendecompose(coe_map)
        assert np.all(pair_match(spec.lambdas, 1e-7 * np.max(np.abs(spec.lambdas))) >= 0)

    def test_broken_symmetry_is_reported(self):
        with pytest.raises(PTSymmetryViolation) as excinfo:
            pair_match(np.array([2.0, 0.3]), 1e-7)
        assert excinfo.value.unmatched == 2

    def test_empty_and_bad_tolerance(self):
        assert pair_match(np.array([], dtype=np.complex128), 1e-7).size == 0
        with pytest.raises(InvalidParameterError):
            pair_match(np.array([1.0]), 0.0)


class TestClassification:
    def test_partition(self):
        spec = spectrum_from_eigenvalues(np.exp([0.5, 0.0, -0.5, 0.05]))
        classes = classify(spec, mu=0.2)
        assert_array_equal(classes.decaying, [0])
        assert_array_equal(classes.neutral, [1, 2])
        assert_array_equal(classes.amplified, [3])
        assert_array_equal(classes.real_states, [1])
        assert classes.total == 4

    def test_unitary_spectrum_has_no_amplified_states(self):
        spec = eigendecompose(kr_map(M=30, mu=0.0))
        classes = classify(spec, mu=0.0)
        assert classes.amplified.size == 0
        assert classes.decaying.size == 0
        assert fraction_amplified(spec, 0.0) == 0.0
        assert real_state_fraction(spec) == 1.0

    def test_threshold_is_strict(self):
        spec = spectrum_from_eigenvalues(np.exp([0.1, 0.3]))
        assert fraction_amplified(spec, 0.2) == 0.5

    def test_amplified_and_decaying_counts_agree(self, kr_map):
        classes = classify(eigendecompose(kr_map), mu=0.2)
        assert classes.amplified.size == classes.decaying.size

    def test_rejects_negative_rate(self):
        with pytest.raises(InvalidParameterError):
            classify(spectrum_from_eigenvalues([1.0]), mu=-1.0)

    def test_ensemble_average(self):
        a = spectrum_from_eigenvalues(np.exp([0.5, -0.5, 0.0, 0.0]))
        b = spectrum_from_eigenvalues(np.exp([0.0, 0.0, 0.0, 0.0]))
        mean, stderr = ensemble_fraction([a, b], 0.2)
        assert mean == pytest.approx(0.125)
        assert stderr == pytest.approx(0.125)
        with pytest.raises(EmptyInputError):
            ensemble_fraction([], 0.2)

    def test_fraction_curve_length_check(self):
        spec = spectrum_from_eigenvalues([1.0])
        assert_allclose(fraction_curve([spec, spec], [0.0, 0.1]), [0.0, 0.0])
        with pytest.raises(InvalidParameterError):
            fraction_curve([spec], [0.0, 0.1])


class TestHistogram:
    def test_mirror_symmetric_and_normalized(self):
        spec = spectrum_from_eigenvalues(np.exp([0.3, -0.3, 0.0, 0.0]))
        hist = im_e_histogram([spec], 0.01)
        assert_array_equal(hist.counts, hist.counts[::-1])
        assert hist.masses.sum() == pytest.approx(1.0)
        assert hist.centers[hist.central_index] == 0.0
        assert hist.central_mass == pytest.approx(0.5)

    def test_kicked_rotator_histogram_is_symmetric(self):
        spec = eigendecompose(kr_map(M=50, mu=0.4))
        hist = im_e_histogram([spec], 0.01)
        assert_array_equal(hist.counts, hist.counts[::-1])
        assert hist.samples == 100

    def test_rejects_bad_input(self):
        with pytest.raises(EmptyInputError):
            im_e_histogram([], 0.01)
        with pytest.raises(InvalidParameterError):
            im_e_histogram([spectrum_from_eigenvalues([1.0])], 0.0)


class TestScaling:
    def test_exact_power_law(self):
        points = [(m, 3.0 * m**-0.5) for m in (100, 200, 400, 800)]
        fit = fit_power_law(points)
        assert fit.exponent_a == pytest.approx(0.5, abs=1e-12)
        assert fit.stderr_a < 1e-10
        assert fit.predict(1600) == pytest.approx(3.0 * 1600**-0.5)
        dimension = estimate_fractal_dimension(fit)
        assert dimension.value == pytest.approx(1.5, abs=1e-12)

    def test_flat_fraction_has_zero_exponent(self):
        fit = fit_power_law([(100, 0.2), (200, 0.2), (400, 0.2)])
        assert fit.exponent_a == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize(
        "points",
        [
            [(100, 0.1), (200, 0.05)],
            [(100, 0.1), (200, 0.0), (400, 0.02)],
            [(100, 0.1), (100, 0.2), (100, 0.3)],
        ],
    )
    def test_degenerate_inputs(self, points):
        with pytest.raises(FitError):
            fit_power_law(points)


class TestRealStateScan:
    def test_all_real_without_gain_loss(self):
        params = SystemParams(M=30, N=6, dynamics=KickedRotatorDynamics(k=8.0))
        fractions = critical_mu_scan(params, [0.0, 0.5])
        assert fractions[0] == 1.0
        assert fractions[1] < 1.0

    def test_requires_ascending_grid(self):
        params = SystemParams(M=10, N=2)
        with pytest.raises(InvalidParameterError):
            critical_mu_scan(params, [0.2, 0.1])
