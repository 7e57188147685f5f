"""Phase-space result types shared by the Husimi and classical analyses.

Both kinds of grid are cell-centred on the unit torus: index (i, j) stands
for q = (i + 1/2)/n_q and p = (j + 1/2)/n_p, so classical indicators and
Husimi densities at equal resolution align cell by cell.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
import numpy.typing as npt

FloatGrid = npt.NDArray[np.float64]
IntGrid = npt.NDArray[np.int64]
BoolGrid = npt.NDArray[np.bool_]

# First-passage sentinel for orbits that never reach the strip within t_max.
NEVER = np.iinfo(np.int64).max


class Direction(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


@dataclass(frozen=True)
class PhasePoint:
    q: float
    p: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "q", float(self.q) % 1.0)
        object.__setattr__(self, "p", float(self.p) % 1.0)


@dataclass(frozen=True)
class CoherentState:
    """Periodized minimal-uncertainty wavepacket on the M-dimensional torus."""

    q0: float
    p0: float
    amplitudes: npt.NDArray[np.complex128]

    @property
    def M(self) -> int:
        return int(self.amplitudes.shape[0])


@dataclass(frozen=True)
class HusimiGrid:
    """Summed Husimi densities of a subspace on the absorbing (L) and amplifying (R) halves."""

    values_L: FloatGrid
    values_R: FloatGrid

    @property
    def resolution(self) -> tuple[int, int]:
        n_q, n_p = self.values_L.shape
        return int(n_q), int(n_p)

    @property
    def mass_L(self) -> float:
        return float(self.values_L.sum())

    @property
    def mass_R(self) -> float:
        return float(self.values_R.sum())

    def normalized_mass(self, M: int) -> float:
        """Total mass times cell area times M; equals the basis size."""
        n_q, n_p = self.resolution
        return (self.mass_L + self.mass_R) * M / (n_q * n_p)


@dataclass(frozen=True)
class PassageTimeGrid:
    """Per-cell first step t >= 1 at which the orbit enters the strip q < strip_width."""

    first_passage: IntGrid
    direction: Direction
    strip_width: float
    t_max: int

    @property
    def resolution(self) -> tuple[int, int]:
        n_q, n_p = self.first_passage.shape
        return int(n_q), int(n_p)

    def as_float(self) -> FloatGrid:
        """First-passage times with the never-reached sentinel mapped to inf."""
        out = self.first_passage.astype(np.float64)
        out[self.first_passage == NEVER] = np.inf
        return out


@dataclass(frozen=True)
class BoxCountResult:
    dimension: float
    stderr: float
    scales: list[int]
    counts: list[int]
