"""File emitters for spectra, tables, grids and the run manifest.

CSV files are written by pandas with 17 significant digits, so numbers read
back exactly. Grids are stored twice: as a headerless CSV matrix (rows = q,
columns = p) and as an 8-bit binary PGM whose top row is the largest p.
"""

from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

import numpy as np
import numpy.typing as npt
import pandas as pd

from src.core.config import settings
from src.core.errors import InvalidParameterError, OutputError
from src.core.logging import get_logger
from src.models.experiment import RunManifest
from src.models.spectral import ImEHistogram, Spectrum
from src.services.spectra import spectrum_from_eigenvalues

logger = get_logger(__name__)

SPECTRUM_COLUMNS = ["re_lambda", "im_lambda", "re_E", "im_E"]
HISTOGRAM_COLUMNS = ["center", "density", "mass", "count"]

PathLike = Union[str, Path]


def _prepare(path: PathLike) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputError(path, str(e)) from e
    return path


def _write_frame(frame: pd.DataFrame, path: PathLike, header: bool = True) -> Path:
    path = _prepare(path)
    try:
        frame.to_csv(
            path,
            index=False,
            header=header,
            float_format=settings.csv_float_format,
            lineterminator="\n",
        )
    except OSError as e:
        raise OutputError(path, str(e)) from e
    logger.debug("Wrote CSV", extra={"path": str(path), "rows": len(frame)})
    return path


def emit_spectrum_csv(spec: Spectrum, path: PathLike) -> Path:
    """One row per eigenvalue in canonical order."""
    frame = pd.DataFrame(
        {
            "re_lambda": spec.lambdas.real,
            "im_lambda": spec.lambdas.imag,
            "re_E": spec.quasienergies.real,
            "im_E": spec.quasienergies.imag,
        },
        columns=SPECTRUM_COLUMNS,
    )
    return _write_frame(frame, path)


def read_spectrum_csv(path: PathLike) -> Spectrum:
    path = Path(path)
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError) as e:
        raise OutputError(path, f"unreadable spectrum file: {e}") from e
    missing = [c for c in SPECTRUM_COLUMNS if c not in frame.columns]
    if missing:
        raise InvalidParameterError(f"{path} lacks spectrum columns {missing}")
    lambdas = frame["re_lambda"].to_numpy() + 1j * frame["im_lambda"].to_numpy()
    return spectrum_from_eigenvalues(lambdas)


def emit_histogram_csv(hist: ImEHistogram, path: PathLike) -> Path:
    frame = pd.DataFrame(
        {
            "center": hist.centers,
            "density": hist.densities,
            "mass": hist.masses,
            "count": hist.counts,
        },
        columns=HISTOGRAM_COLUMNS,
    )
    return _write_frame(frame, path)


def emit_table_csv(
    rows: Sequence[Dict[str, Any]], path: PathLike, columns: List[str]
) -> Path:
    """Scalar tables (fractions, fits, transition scans, summaries) with a header row."""
    frame = pd.DataFrame(list(rows), columns=columns)
    return _write_frame(frame, path)


def emit_grid_csv(values: npt.ArrayLike, path: PathLike) -> Path:
    """Headerless matrix; row i is q cell i, column j is p cell j. Infinity prints as ``inf``."""
    grid = np.asarray(values)
    if grid.ndim != 2:
        raise InvalidParameterError(f"grid must be 2-D, got shape {grid.shape}")
    if grid.dtype == np.bool_:
        grid = grid.astype(np.int64)
    return _write_frame(pd.DataFrame(grid), path, header=False)


def grid_to_pixels(values: npt.ArrayLike) -> npt.NDArray[np.uint8]:
    """Max-normalized 8-bit image with rows ordered by p descending."""
    grid = np.asarray(values, dtype=np.float64)
    if grid.ndim != 2:
        raise InvalidParameterError(f"grid must be 2-D, got shape {grid.shape}")
    if not np.all(np.isfinite(grid)):
        raise InvalidParameterError("grid has non-finite values; map them before imaging")
    grid = np.clip(grid, 0.0, None)
    peak = float(grid.max()) if grid.size else 0.0
    if peak > 0.0:
        scaled = np.rint(255.0 * grid / peak)
    else:
        scaled = np.zeros_like(grid)
    return np.ascontiguousarray(scaled.T[::-1]).astype(np.uint8)


def emit_grid_pgm(values: npt.ArrayLike, path: PathLike) -> Path:
    pixels = grid_to_pixels(values)
    height, width = pixels.shape
    path = _prepare(path)
    try:
        path.write_bytes(f"P5\n{width} {height}\n255\n".encode("ascii") + pixels.tobytes())
    except OSError as e:
        raise OutputError(path, str(e)) from e
    return path


def write_manifest(manifest: RunManifest, path: PathLike) -> Path:
    path = _prepare(path)
    try:
        path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise OutputError(path, str(e)) from e
    logger.info(
        "Manifest written",
        extra={"path": str(path), "completed": manifest.completed, "failed": manifest.failed},
    )
    return path
