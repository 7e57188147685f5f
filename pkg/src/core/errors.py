"""Error hierarchy for PT-Weyl.

Services raise these; the experiment harness records them per task without
aborting a sweep.
"""

from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np


class PTWeylError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(PTWeylError, ValueError):
    """An argument violates an operation's precondition."""


class EmptyInputError(PTWeylError, ValueError):
    """An operation received no data to work on."""


class ConfigurationError(PTWeylError):
    """An experiment configuration could not be loaded or validated."""

    def __init__(self, message: str, source: Optional[Path] = None):
        self.source = source
        prefix = f"{source}: " if source is not None else ""
        super().__init__(f"{prefix}{message}")


class EigensolverError(PTWeylError):
    """The dense eigensolver failed to converge."""

    def __init__(self, message: str, descriptor: Dict[str, Any]):
        self.descriptor = descriptor
        super().__init__(f"{message} [matrix: {descriptor}]")


class PTSymmetryViolation(PTWeylError):
    """Eigenvalues could not be matched into PT pairs lambda <-> 1/lambda*."""

    def __init__(self, unmatched: int, worst_mismatch: float, tol: float):
        self.unmatched = unmatched
        self.worst_mismatch = worst_mismatch
        self.tol = tol
        super().__init__(
            f"{unmatched} eigenvalue(s) without a PT partner within tol={tol:.3e}; "
            f"worst mismatch {worst_mismatch:.3e}"
        )


class RankDeficiencyError(PTWeylError):
    """A vector set is linearly dependent to working precision."""

    def __init__(self, n_vectors: int, rank: int, min_pivot_ratio: float):
        self.n_vectors = n_vectors
        self.rank = rank
        self.min_pivot_ratio = min_pivot_ratio
        super().__init__(
            f"{n_vectors} vectors span only rank {rank} "
            f"(smallest relative pivot {min_pivot_ratio:.3e})"
        )


class FitError(PTWeylError):
    """A scaling or dimension fit received degenerate input."""


class OutputError(PTWeylError):
    """Writing an artifact failed."""

    def __init__(self, path: Path, reason: str):
        self.path = path
        super().__init__(f"cannot write {path}: {reason}")


def describe_matrix(matrix: np.ndarray) -> Dict[str, Any]:
    """Summarize a matrix for error messages without dumping its entries."""
    finite = bool(np.all(np.isfinite(matrix)))
    return {
        "shape": tuple(int(s) for s in matrix.shape),
        "dtype": str(matrix.dtype),
        "finite": finite,
        "frobenius_norm": float(np.linalg.norm(matrix)) if finite else float("nan"),
    }
