"""Classical kicked map on the unit torus and its coupling to the interface.

    q' = q + p + (k/4pi) sin(2pi q)                    (mod 1)
    p' = p + (k/4pi) [sin(2pi q) + sin(2pi q')]        (mod 1)

The interface is the strip q in [0, strip_width) with strip_width = N/M,
matching the quantum channels on the first N position states. Grids are
cell-centred with one orbit per cell.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Sequence, Tuple

import numpy as np
import numpy.typing as npt
from scipy import stats

from src.core.errors import EmptyInputError, InvalidParameterError
from src.core.logging import get_logger
from src.models.phase_space import (
    NEVER,
    BoolGrid,
    BoxCountResult,
    Direction,
    PassageTimeGrid,
    PhasePoint,
)
from src.services.husimi import grid_axis

logger = get_logger(__name__)

Coords = npt.NDArray[np.float64]

ROW_BLOCK = 64


def _wrap(x: Coords) -> Coords:
    r = np.mod(x, 1.0)
    # mod of a tiny negative number rounds to exactly 1.0
    return np.where(r >= 1.0, 0.0, r)


def forward_map(q: npt.ArrayLike, p: npt.ArrayLike, k: float) -> Tuple[Coords, Coords]:
    """One step of the map on coordinate arrays."""
    q = np.asarray(q, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    kappa = k / (4.0 * np.pi)
    sin_q = np.sin(2.0 * np.pi * q)
    q_next = _wrap(q + p + kappa * sin_q)
    p_next = _wrap(p + kappa * (sin_q + np.sin(2.0 * np.pi * q_next)))
    return q_next, p_next


def inverse_map(q: npt.ArrayLike, p: npt.ArrayLike, k: float) -> Tuple[Coords, Coords]:
    """Exact inverse of :func:`forward_map`."""
    q = np.asarray(q, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    kappa = k / (4.0 * np.pi)
    sin_q = np.sin(2.0 * np.pi * q)
    q_prev = _wrap(q - p + kappa * sin_q)
    p_prev = _wrap(p - kappa * (np.sin(2.0 * np.pi * q_prev) + sin_q))
    return q_prev, p_prev


def classical_step(pt: PhasePoint, k: float) -> PhasePoint:
    q, p = forward_map(pt.q, pt.p, k)
    return PhasePoint(float(q), float(p))


def classical_inverse(pt: PhasePoint, k: float) -> PhasePoint:
    q, p = inverse_map(pt.q, pt.p, k)
    return PhasePoint(float(q), float(p))


def torus_distance(a: npt.ArrayLike, b: npt.ArrayLike) -> Coords:
    """Per-coordinate distance on the circle of circumference one."""
    d = np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)) % 1.0
    return np.minimum(d, 1.0 - d)


def jacobian_determinant(
    q: npt.ArrayLike, p: npt.ArrayLike, k: float, h: float = 1e-6
) -> Coords:
    """Determinant of the one-step Jacobian by central differences (unwrapped map)."""
    q = np.asarray(q, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    kappa = k / (4.0 * np.pi)

    def lifted(qq: Coords, pp: Coords) -> Tuple[Coords, Coords]:
        sin_q = np.sin(2.0 * np.pi * qq)
        q_next = qq + pp + kappa * sin_q
        return q_next, pp + kappa * (sin_q + np.sin(2.0 * np.pi * q_next))

    qa, pa = lifted(q + h, p)
    qb, pb = lifted(q - h, p)
    qc, pc = lifted(q, p + h)
    qd, pd = lifted(q, p - h)
    dq_dq, dp_dq = (qa - qb) / (2 * h), (pa - pb) / (2 * h)
    dq_dp, dp_dp = (qc - qd) / (2 * h), (pc - pd) / (2 * h)
    return dq_dq * dp_dp - dq_dp * dp_dq


# =============================================================================
# Coupled regions and trapped sets
# =============================================================================


def cell_centers(resolution: Tuple[int, int]) -> Tuple[Coords, Coords]:
    n_q, n_p = resolution
    if n_q < 1 or n_p < 1:
        raise InvalidParameterError(f"resolution must be positive, got {resolution}")
    return np.meshgrid(grid_axis(n_q), grid_axis(n_p), indexing="ij")


def coupled_regions(
    k: float,
    strip_width: float,
    t_max: int,
    resolution: Tuple[int, int],
    direction: Direction,
    workers: int = 1,
) -> PassageTimeGrid:
    """First step t in 1..t_max at which each cell's orbit lies in the strip.

    Backward: the orbit under the inverse map, so the cells coupled at step t
    form the t-th forward image of the strip. Forward: the orbit under the map.
    Cells that never enter within t_max carry the NEVER sentinel.
    """
    if not 0.0 < strip_width <= 1.0:
        raise InvalidParameterError(f"strip_width must lie in (0, 1], got {strip_width}")
    if t_max < 1:
        raise InvalidParameterError(f"t_max must be >= 1, got {t_max}")
    direction = Direction(direction)
    step = inverse_map if direction is Direction.BACKWARD else forward_map

    Q, P = cell_centers(resolution)
    first = np.full(Q.shape, NEVER, dtype=np.int64)

    def run_block(start: int) -> None:
        stop = min(start + ROW_BLOCK, Q.shape[0])
        q, p = Q[start:stop], P[start:stop]
        block = first[start:stop]
        for t in range(1, t_max + 1):
            q, p = step(q, p, k)
            hit = (q < strip_width) & (block == NEVER)
            block[hit] = t

    starts = range(0, Q.shape[0], ROW_BLOCK)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run_block, starts))
    else:
        for start in starts:
            run_block(start)

    logger.debug(
        "Coupled regions computed",
        extra={
            "k": k,
            "strip_width": strip_width,
            "t_max": t_max,
            "direction": direction.value,
            "trapped_fraction": float(np.mean(first == NEVER)),
        },
    )
    return PassageTimeGrid(
        first_passage=first, direction=direction, strip_width=strip_width, t_max=t_max
    )


def coupled_within(grid: PassageTimeGrid, t: int) -> BoolGrid:
    """Cells coupled to the interface within t steps (nested in t)."""
    if not 1 <= t <= grid.t_max:
        raise InvalidParameterError(f"t must lie in 1..{grid.t_max}, got {t}")
    return grid.first_passage <= t


def trapped_set_indicator(grid: PassageTimeGrid) -> BoolGrid:
    """Cells whose orbit avoids the strip for t_max steps."""
    return grid.first_passage == NEVER


def time_reverse_grid(grid: PassageTimeGrid) -> PassageTimeGrid:
    """Image under (q, p) -> (q, -p), which exchanges forward and backward orbits."""
    flipped = (
        Direction.FORWARD if grid.direction is Direction.BACKWARD else Direction.BACKWARD
    )
    return PassageTimeGrid(
        first_passage=grid.first_passage[:, ::-1].copy(),
        direction=flipped,
        strip_width=grid.strip_width,
        t_max=grid.t_max,
    )


def strip_image_area(
    k: float,
    strip_width: float,
    resolution: Tuple[int, int],
    direction: Direction = Direction.BACKWARD,
) -> float:
    """Area of the one-step image of the strip; equals strip_width for an area-preserving map."""
    grid = coupled_regions(k, strip_width, 1, resolution, direction)
    return float(np.mean(grid.first_passage == 1))


# =============================================================================
# Box counting
# =============================================================================


def box_counting_dimension(indicator: BoolGrid, scales: Sequence[int]) -> BoxCountResult:
    """Slope of ln(occupied boxes) against ln(1/box size).

    ``scales`` are box edge lengths in cells and must divide both grid sides.
    """
    indicator = np.asarray(indicator, dtype=bool)
    if indicator.ndim != 2:
        raise InvalidParameterError(f"indicator must be 2-D, got shape {indicator.shape}")
    sizes = sorted({int(s) for s in scales})
    if len(sizes) < 3:
        raise InvalidParameterError(f"need at least 3 distinct scales, got {list(scales)}")
    n_q, n_p = indicator.shape
    for s in sizes:
        if s < 1 or n_q % s or n_p % s:
            raise InvalidParameterError(f"scale {s} does not divide the grid {indicator.shape}")
    if not indicator.any():
        raise EmptyInputError("indicator is empty")

    counts = [
        int(indicator.reshape(n_q // s, s, n_p // s, s).any(axis=(1, 3)).sum()) for s in sizes
    ]
    result = stats.linregress(np.log(n_q / np.asarray(sizes, dtype=np.float64)), np.log(counts))
    return BoxCountResult(
        dimension=float(result.slope),
        stderr=float(result.stderr),
        scales=sizes,
        counts=counts,
    )
