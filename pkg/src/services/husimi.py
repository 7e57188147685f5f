"""Husimi phase-space supports of spectral subspaces.

Coherent states on the M-dimensional torus are symmetric periodized
Gaussians (cell area 1/M, equal widths in q and p) with the winding sum
truncated at |nu| <= 3. A subspace spanned by nonorthogonal eigenvectors is
first orthonormalized by a QR factorization; its Husimi density is then the
sum of |<q,p|phi_n>|^2 over the basis, evaluated separately on the absorbing
(first M) and amplifying (last M) amplitudes. Sub-blocks are not
renormalized, so L/R mass ratios carry meaning.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt
from scipy import linalg

from src.core.config import settings
from src.core.errors import EmptyInputError, InvalidParameterError, RankDeficiencyError
from src.core.logging import get_logger
from src.models.phase_space import BoolGrid, CoherentState, FloatGrid, HusimiGrid
from src.models.spectral import Spectrum

logger = get_logger(__name__)

WINDING_CUTOFF = 3
_WINDINGS = np.arange(-WINDING_CUTOFF, WINDING_CUTOFF + 1, dtype=np.float64)

ComplexColumns = npt.NDArray[np.complex128]


def grid_axis(n: int) -> npt.NDArray[np.float64]:
    """Cell centres (i + 1/2)/n of a uniform torus axis."""
    return (np.arange(n, dtype=np.float64) + 0.5) / n


def coherent_state_matrix(
    M: int, q0: float, p_values: npt.ArrayLike
) -> npt.NDArray[np.complex128]:
    """Normalized coherent states |q0, p> for every p, one per row (shape n_p x M).

    <m|q0,p> ~ sum_nu exp[-pi M (m/M - q0 - nu)^2 + 2 pi i M p (m/M - nu)]
    """
    if M < 1:
        raise InvalidParameterError(f"M must be >= 1, got {M}")
    p = np.atleast_1d(np.asarray(p_values, dtype=np.float64))
    m = np.arange(M, dtype=np.float64)

    offsets = m[:, None] / M - q0 - _WINDINGS[None, :]
    gauss = np.exp(-np.pi * M * offsets**2)  # M x windings
    winding_phase = np.exp(-2j * np.pi * M * p[:, None] * _WINDINGS[None, :])  # n_p x windings
    site_phase = np.exp(2j * np.pi * p[:, None] * m[None, :])  # n_p x M

    states = site_phase * (winding_phase @ gauss.T)
    states /= np.linalg.norm(states, axis=1, keepdims=True)
    return states


def coherent_state(M: int, q0: float, p0: float) -> CoherentState:
    amplitudes = coherent_state_matrix(M, q0, [p0])[0]
    return CoherentState(q0=q0, p0=p0, amplitudes=amplitudes)


def orthonormal_subspace_basis(
    vectors: Union[ComplexColumns, Sequence[npt.ArrayLike]],
    rtol: float = settings.qr_rank_rtol,
) -> ComplexColumns:
    """Orthonormal columns spanning the same space as ``vectors``.

    ``vectors`` is either a (dim x K) column array or a sequence of K vectors.
    Uses a column-pivoted QR factorization; a pivot below ``rtol`` times the
    largest one signals linear dependence.
    """
    if isinstance(vectors, np.ndarray):
        V = np.asarray(vectors, dtype=np.complex128)
    else:
        if len(vectors) == 0:
            raise EmptyInputError("no vectors given; pass a (dim x 0) array for an empty span")
        V = np.column_stack([np.asarray(v, dtype=np.complex128) for v in vectors])
    if V.ndim != 2:
        raise InvalidParameterError(f"expected a column array, got shape {V.shape}")

    n_vectors = V.shape[1]
    if n_vectors == 0:
        return V.copy()
    if n_vectors > V.shape[0]:
        raise RankDeficiencyError(n_vectors, V.shape[0], 0.0)

    Q, R, _ = linalg.qr(V, mode="economic", pivoting=True)
    pivots = np.abs(np.diagonal(R))
    ratios = pivots / pivots[0] if pivots[0] > 0 else np.zeros_like(pivots)
    rank = int(np.count_nonzero(ratios > rtol))
    if rank < n_vectors:
        raise RankDeficiencyError(n_vectors, rank, float(ratios.min()))
    return np.asarray(Q, dtype=np.complex128)


def husimi_map(
    basis: ComplexColumns,
    M: int,
    resolution: Tuple[int, int],
    workers: int = 1,
) -> HusimiGrid:
    """Summed Husimi densities of an orthonormal basis on both halves.

    Rows of the grid (fixed q) are evaluated independently, in a thread pool
    when ``workers > 1``, and stored by row index.
    """
    n_q, n_p = resolution
    if n_q < 1 or n_p < 1:
        raise InvalidParameterError(f"resolution must be positive, got {resolution}")
    basis = np.asarray(basis, dtype=np.complex128)
    if basis.ndim == 1:
        basis = basis[:, None]
    if basis.shape[0] != 2 * M:
        raise InvalidParameterError(
            f"basis vectors have dimension {basis.shape[0]}, expected 2M = {2 * M}"
        )

    values_L = np.zeros((n_q, n_p), dtype=np.float64)
    values_R = np.zeros((n_q, n_p), dtype=np.float64)
    if basis.shape[1] == 0:
        return HusimiGrid(values_L=values_L, values_R=values_R)

    block_L = basis[:M]
    block_R = basis[M:]
    q_axis = grid_axis(n_q)
    p_axis = grid_axis(n_p)

    def evaluate_row(i: int) -> None:
        bras = coherent_state_matrix(M, float(q_axis[i]), p_axis).conj()
        values_L[i] = np.sum(np.abs(bras @ block_L) ** 2, axis=1)
        values_R[i] = np.sum(np.abs(bras @ block_R) ** 2, axis=1)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(evaluate_row, range(n_q)))
    else:
        for i in range(n_q):
            evaluate_row(i)

    logger.debug(
        "Husimi grid evaluated",
        extra={"M": M, "basis_size": int(basis.shape[1]), "resolution": [n_q, n_p]},
    )
    return HusimiGrid(values_L=values_L, values_R=values_R)


def subspace_grid(
    spec: Spectrum,
    indices: npt.ArrayLike,
    M: int,
    resolution: Tuple[int, int],
    workers: int = 1,
) -> HusimiGrid:
    """Husimi support of the eigenvectors selected by ``indices``."""
    if spec.eigenvectors is None:
        raise InvalidParameterError("spectrum was computed without eigenvectors")
    idx = np.asarray(indices, dtype=np.int64)
    basis = orthonormal_subspace_basis(spec.eigenvectors[:, idx])
    return husimi_map(basis, M, resolution, workers=workers)


def pt_transform_grid(grid: HusimiGrid) -> HusimiGrid:
    """PT image: swap L and R and map p -> -p (column j -> n_p - 1 - j)."""
    return HusimiGrid(
        values_L=grid.values_R[:, ::-1].copy(),
        values_R=grid.values_L[:, ::-1].copy(),
    )


def grid_distance(a: HusimiGrid, b: HusimiGrid) -> float:
    """Relative L1 distance sum|a - b| / sum|b| over both halves."""
    if a.resolution != b.resolution:
        raise InvalidParameterError(f"resolutions differ: {a.resolution} vs {b.resolution}")
    norm = float(np.abs(b.values_L).sum() + np.abs(b.values_R).sum())
    diff = float(np.abs(a.values_L - b.values_L).sum() + np.abs(a.values_R - b.values_R).sum())
    if norm == 0.0:
        return 0.0 if diff == 0.0 else float("inf")
    return diff / norm


def region_enrichment(values: FloatGrid, indicator: BoolGrid) -> float:
    """Share of the mass on ``indicator`` divided by the indicator's area share.

    One for a uniform density; above one when the density concentrates on the region.
    """
    values = np.asarray(values, dtype=np.float64)
    indicator = np.asarray(indicator, dtype=bool)
    if values.shape != indicator.shape:
        raise InvalidParameterError(
            f"grid shape {values.shape} does not match indicator shape {indicator.shape}"
        )
    total = float(values.sum())
    area = float(indicator.mean())
    if total <= 0.0:
        raise EmptyInputError("density grid carries no mass")
    if area == 0.0:
        raise EmptyInputError("indicator region is empty")
    return float(values[indicator].sum()) / total / area
