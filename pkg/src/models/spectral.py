"""Numerical result types of the spectral analysis."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import numpy.typing as npt

FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]
ComplexArray = npt.NDArray[np.complex128]


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of a PT map in canonical (Re lambda, Im lambda) order.

    ``quasienergies`` are E_n = i ln(lambda_n) with Re E_n in (-pi, pi] and
    Im E_n = ln|lambda_n|; ``eigenvectors`` holds unit-norm columns matching
    ``lambdas`` when requested.
    """

    lambdas: ComplexArray
    quasienergies: ComplexArray
    max_residual: float
    eigenvectors: Optional[ComplexArray] = None

    @property
    def dimension(self) -> int:
        return int(self.lambdas.shape[0])

    @property
    def im_e(self) -> FloatArray:
        return np.asarray(self.quasienergies.imag, dtype=np.float64)

    @property
    def decay_rates(self) -> FloatArray:
        """Gamma_n = -2 Im E_n (negative for amplified states)."""
        return -2.0 * self.im_e


@dataclass(frozen=True)
class SpectralClassification:
    """Partition of eigenvalue indices by amplification class."""

    amplified: IntArray
    neutral: IntArray
    decaying: IntArray
    real_states: IntArray
    delta_real: float
    mu: float

    @property
    def total(self) -> int:
        return int(self.amplified.size + self.neutral.size + self.decaying.size)


@dataclass(frozen=True)
class ScalingFit:
    """Power-law fit f_> ~ M^(-a) by OLS in log-log coordinates."""

    points: list[tuple[int, float]]
    exponent_a: float
    stderr_a: float
    intercept: float

    def predict(self, m: float) -> float:
        return float(np.exp(self.intercept) * m ** (-self.exponent_a))


@dataclass(frozen=True)
class FractalDimension:
    value: float
    stderr: float


@dataclass(frozen=True)
class ImEHistogram:
    """Histogram of Im E with a central bin [-w/2, w/2] centred on zero."""

    centers: FloatArray
    densities: FloatArray
    counts: IntArray
    bin_width: float
    samples: int = field(default=0)

    @property
    def masses(self) -> FloatArray:
        """Per-bin probabilities (sum to one)."""
        return self.densities * self.bin_width

    @property
    def central_index(self) -> int:
        return int(np.argmin(np.abs(self.centers)))

    @property
    def central_mass(self) -> float:
        return float(self.masses[self.central_index])
