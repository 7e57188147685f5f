"""Spectral analysis of PT-symmetric maps.

Eigenvalues come from a dense non-symmetric solver (LAPACK geev through
SciPy). PT symmetry shows up as the pairing lambda <-> 1/lambda* of the
eigenvalue multiset, which is checked directly instead of building the
self-inversive characteristic polynomial.
"""

import time
from typing import List, NamedTuple, Sequence, Set, Tuple

import numpy as np
from scipy import linalg, stats
from scipy.spatial import cKDTree

from src.core.config import settings
from src.core.errors import (
    EigensolverError,
    EmptyInputError,
    FitError,
    InvalidParameterError,
    PTSymmetryViolation,
    describe_matrix,
)
from src.core.logging import get_logger
from src.models.spectral import (
    ComplexArray,
    FloatArray,
    FractalDimension,
    ImEHistogram,
    IntArray,
    ScalingFit,
    SpectralClassification,
    Spectrum,
)
from src.models.system import ComplexMatrix, SystemParams
from src.services.operators import (
    assemble_pt_map,
    build_coupling,
    build_internal_dynamics,
    validate_complex_matrix,
)

logger = get_logger(__name__)

RESIDUAL_WARN_LEVEL = 1e-8


class SpectralIdentities(NamedTuple):
    trace_rel_error: float
    log_det_error: float
    det_modulus_error: float


# =============================================================================
# Diagonalization
# =============================================================================


def quasienergies(lambdas: ComplexArray) -> ComplexArray:
    """E = i ln(lambda): Re E = -arg(lambda) folded into (-pi, pi], Im E = ln|lambda|."""
    lambdas = np.asarray(lambdas, dtype=np.complex128)
    re = -np.angle(lambdas)
    re = np.where(re <= -np.pi, re + 2.0 * np.pi, re)
    with np.errstate(divide="ignore"):
        im = np.log(np.abs(lambdas))
    return re + 1j * im


def canonical_order(lambdas: ComplexArray) -> IntArray:
    """Permutation sorting by (Re lambda, Im lambda)."""
    return np.lexsort((lambdas.imag, lambdas.real))


def spectrum_from_eigenvalues(lambdas: Sequence[complex]) -> Spectrum:
    """Spectrum of given eigenvalues without a solver run (max_residual = 0)."""
    arr = np.asarray(lambdas, dtype=np.complex128)
    if arr.ndim != 1:
        raise InvalidParameterError(f"eigenvalues must be a flat sequence, got {arr.shape}")
    arr = arr[canonical_order(arr)]
    return Spectrum(lambdas=arr, quasienergies=quasienergies(arr), max_residual=0.0)


def eigendecompose(pt_map: ComplexMatrix, want_vectors: bool = False) -> Spectrum:
    """Full eigendecomposition with per-eigenpair residuals.

    Right eigenvectors are always computed so the residual
    max_n ||F psi_n - lambda_n psi_n|| can be reported; they are only kept on
    the result when ``want_vectors`` is set.
    """
    pt_map = validate_complex_matrix(pt_map, "map")
    start = time.perf_counter()
    try:
        lambdas, vectors = linalg.eig(pt_map, right=True, check_finite=False)
    except (linalg.LinAlgError, ValueError) as e:
        raise EigensolverError(f"eigensolver failed: {e}", describe_matrix(pt_map)) from e

    lambdas = np.asarray(lambdas, dtype=np.complex128)
    if not np.all(np.isfinite(lambdas)):
        raise EigensolverError("eigensolver returned non-finite values", describe_matrix(pt_map))

    order = canonical_order(lambdas)
    lambdas = lambdas[order]
    vectors = np.asarray(vectors[:, order], dtype=np.complex128)
    vectors /= np.linalg.norm(vectors, axis=0, keepdims=True)

    residuals = np.linalg.norm(pt_map @ vectors - vectors * lambdas[None, :], axis=0)
    max_residual = float(np.max(residuals))

    logger.info(
        "Diagonalized map",
        extra={
            "dimension": pt_map.shape[0],
            "max_residual": max_residual,
            "wall_time_s": time.perf_counter() - start,
        },
    )
    if max_residual > RESIDUAL_WARN_LEVEL:
        logger.warning("Large eigenpair residual", extra={"max_residual": max_residual})

    return Spectrum(
        lambdas=lambdas,
        quasienergies=quasienergies(lambdas),
        max_residual=max_residual,
        eigenvectors=vectors if want_vectors else None,
    )


def spectral_identities(spec: Spectrum, pt_map: ComplexMatrix) -> SpectralIdentities:
    """Trace and determinant identities of a computed spectrum.

    Returns the relative trace error |sum lambda - tr F| / max(|tr F|, 1), the
    mismatch between sum ln|lambda| and ln|det F| (LU), and the deviation of
    |prod lambda| from one.
    """
    trace = complex(np.trace(pt_map))
    trace_rel_error = abs(complex(np.sum(spec.lambdas)) - trace) / max(abs(trace), 1.0)

    log_modulus = float(np.sum(np.log(np.abs(spec.lambdas))))
    _, log_abs_det = np.linalg.slogdet(pt_map)
    return SpectralIdentities(
        trace_rel_error=float(trace_rel_error),
        log_det_error=abs(log_modulus - float(log_abs_det)),
        det_modulus_error=abs(float(np.expm1(log_modulus))),
    )


# =============================================================================
# PT pairing
# =============================================================================


def pair_match(lambdas: ComplexArray, tol: float) -> IntArray:
    """Match every eigenvalue with a partner near 1/lambda*.

    Greedy on the symmetric mismatch max(|lambda_j - 1/lambda_n*|,
    |lambda_n - 1/lambda_j*|): closest candidates are paired first and every
    index is used once. Self-paired indices are the unimodular eigenvalues.
    In degenerate clusters the individual partners are ambiguous; the counts
    of self-paired and cross-paired indices are not.
    """
    if tol <= 0:
        raise InvalidParameterError(f"tol must be positive, got {tol}")
    lambdas = np.asarray(lambdas, dtype=np.complex128)
    n = lambdas.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)

    targets = 1.0 / lambdas.conj()
    points = np.column_stack((lambdas.real, lambdas.imag))
    tree = cKDTree(points)
    neighbours = tree.query_ball_point(np.column_stack((targets.real, targets.imag)), r=tol)

    seen: Set[Tuple[int, int]] = set()
    candidates: List[Tuple[float, int, int]] = []
    for i, js in enumerate(neighbours):
        for j in js:
            pair = (min(i, int(j)), max(i, int(j)))
            if pair in seen:
                continue
            seen.add(pair)
            a, b = pair
            mismatch = max(abs(lambdas[b] - targets[a]), abs(lambdas[a] - targets[b]))
            if mismatch < tol:
                candidates.append((float(mismatch), a, b))
    candidates.sort()

    partners = np.full(n, -1, dtype=np.int64)
    for _, i, j in candidates:
        if partners[i] < 0 and partners[j] < 0:
            partners[i] = j
            partners[j] = i

    unmatched = np.flatnonzero(partners < 0)
    if unmatched.size:
        distances, _ = tree.query(
            np.column_stack((targets[unmatched].real, targets[unmatched].imag))
        )
        raise PTSymmetryViolation(int(unmatched.size), float(np.max(distances)), tol)
    return partners


# =============================================================================
# Classification and observables
# =============================================================================


def classify(
    spec: Spectrum,
    mu: float,
    delta_real: float = settings.delta_real,
    atol: float = settings.classify_atol,
) -> SpectralClassification:
    """Split states into amplified (Im E > mu/2), decaying (Im E < -mu/2) and neutral."""
    if mu < 0:
        raise InvalidParameterError(f"mu must be non-negative, got {mu}")
    if delta_real <= 0:
        raise InvalidParameterError(f"delta_real must be positive, got {delta_real}")

    im_e = spec.im_e
    threshold = 0.5 * mu + atol
    amplified = im_e > threshold
    decaying = im_e < -threshold
    neutral = ~(amplified | decaying)
    return SpectralClassification(
        amplified=np.flatnonzero(amplified),
        neutral=np.flatnonzero(neutral),
        decaying=np.flatnonzero(decaying),
        real_states=np.flatnonzero(np.abs(im_e) < delta_real),
        delta_real=delta_real,
        mu=mu,
    )


def fraction_amplified(spec: Spectrum, mu: float, atol: float = settings.classify_atol) -> float:
    """f_> = #{Im E > mu/2} / 2M."""
    if mu < 0:
        raise InvalidParameterError(f"mu must be non-negative, got {mu}")
    return float(np.count_nonzero(spec.im_e > 0.5 * mu + atol)) / spec.dimension


def real_state_fraction(spec: Spectrum, delta_real: float = settings.delta_real) -> float:
    return float(np.count_nonzero(np.abs(spec.im_e) < delta_real)) / spec.dimension


def fraction_curve(spectra: Sequence[Spectrum], mu_grid: Sequence[float]) -> FloatArray:
    """f_>(mu) for a family of spectra computed at the matching mu values."""
    if len(spectra) != len(mu_grid):
        raise InvalidParameterError(
            f"{len(spectra)} spectra for {len(mu_grid)} mu values"
        )
    return np.array([fraction_amplified(s, mu) for s, mu in zip(spectra, mu_grid)])


def ensemble_fraction(spectra: Sequence[Spectrum], mu: float) -> Tuple[float, float]:
    """Mean f_> over an ensemble and its standard error."""
    if not spectra:
        raise EmptyInputError("no spectra to average")
    values = np.array([fraction_amplified(s, mu) for s in spectra])
    stderr = float(values.std(ddof=1) / np.sqrt(values.size)) if values.size > 1 else 0.0
    return float(values.mean()), stderr


def im_e_histogram(spectra: Sequence[Spectrum], bin_width: float) -> ImEHistogram:
    """Normalized histogram of Im E pooled over spectra.

    Bins are centred on multiples of ``bin_width``; the bin index of x is
    sign(x) floor(|x|/w + 1/2), so mirrored values land in mirrored bins and
    Im E = 0 falls in the single central bin.
    """
    if bin_width <= 0:
        raise InvalidParameterError(f"bin_width must be positive, got {bin_width}")
    if not spectra:
        raise EmptyInputError("no spectra to histogram")
    values = np.concatenate([s.im_e for s in spectra])
    if values.size == 0:
        raise EmptyInputError("spectra contain no eigenvalues")
    if not np.all(np.isfinite(values)):
        raise InvalidParameterError("Im E contains non-finite values (zero eigenvalue?)")

    index = (np.sign(values) * np.floor(np.abs(values) / bin_width + 0.5)).astype(np.int64)
    half = int(np.max(np.abs(index)))
    counts = np.bincount(index + half, minlength=2 * half + 1).astype(np.int64)
    centers = np.arange(-half, half + 1, dtype=np.float64) * bin_width
    densities = counts / (values.size * bin_width)
    return ImEHistogram(
        centers=centers,
        densities=densities,
        counts=counts,
        bin_width=bin_width,
        samples=int(values.size),
    )


# =============================================================================
# Scaling
# =============================================================================


def fit_power_law(points: Sequence[Tuple[int, float]]) -> ScalingFit:
    """OLS fit of ln f_> = intercept - a ln M."""
    pts = sorted((int(m), float(f)) for m, f in points)
    if len(pts) < 3:
        raise FitError(f"power-law fit needs at least 3 points, got {len(pts)}")
    if any(f <= 0 for _, f in pts):
        raise FitError(
            "f_> = 0 at some M: use a larger ensemble or a smaller mu to resolve the fraction"
        )
    if len({m for m, _ in pts}) < 2:
        raise FitError("power-law fit needs at least two distinct M")

    ln_m = np.log([m for m, _ in pts])
    ln_f = np.log([f for _, f in pts])
    result = stats.linregress(ln_m, ln_f)
    return ScalingFit(
        points=pts,
        exponent_a=float(-result.slope),
        stderr_a=float(result.stderr),
        intercept=float(result.intercept),
    )


def estimate_fractal_dimension(fit: ScalingFit) -> FractalDimension:
    """d_H = 2 - a with the fit's standard error."""
    return FractalDimension(value=2.0 - fit.exponent_a, stderr=fit.stderr_a)


def critical_mu_scan(
    params: SystemParams,
    mu_grid: Sequence[float],
    delta_real: float = settings.delta_real,
) -> FloatArray:
    """Fraction of real quasienergies along an ascending mu grid.

    The internal dynamics is built once and reused for every mu.
    """
    mus = np.asarray(mu_grid, dtype=np.float64)
    if np.any(np.diff(mus) < 0):
        raise InvalidParameterError("mu_grid must be sorted ascending")

    F = build_internal_dynamics(params)
    _, sqrtC = build_coupling(params.M, params.N)
    fractions = np.empty(mus.size, dtype=np.float64)
    for i, mu in enumerate(mus):
        spec = eigendecompose(assemble_pt_map(F, float(mu), sqrtC))
        fractions[i] = real_state_fraction(spec, delta_real)
    logger.debug(
        "Real-state scan finished",
        extra={"system": params.describe(), "points": int(mus.size)},
    )
    return fractions
