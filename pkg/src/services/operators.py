"""Matrices of the PT-symmetric resonator model.

The composed map acts on 2M amplitudes (psi_L, psi_R): the absorbing half
evolves with exp(-mu) F, the amplifying half with exp(+mu) F^T, and both are
coupled through the first N basis states (the interface channels) by the
symmetrized coupling sqrt(C) on either side.

Index convention: m = 0, ..., M-1 everywhere. Channels are the first N states,
matching the classical interface strip q in [0, N/M).
"""

from typing import Tuple, Union

import numpy as np
from scipy import linalg

from src.core.errors import InvalidParameterError
from src.core.logging import get_logger
from src.models.system import (
    COEDynamics,
    ComplexMatrix,
    KickedRotatorDynamics,
    QuantumState,
    SystemParams,
)

logger = get_logger(__name__)

SQRT_HALF = 1.0 / np.sqrt(2.0)


def validate_complex_matrix(matrix: np.ndarray, name: str = "matrix") -> ComplexMatrix:
    """Return ``matrix`` as complex128 after checking it is square and finite."""
    arr = np.asarray(matrix, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidParameterError(f"{name} must be square, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise InvalidParameterError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(f"{name} has non-finite entries")
    return arr


def unitarity_residual(matrix: ComplexMatrix) -> float:
    """max |(A^dagger A - I)_ij|."""
    dim = matrix.shape[0]
    return float(np.max(np.abs(matrix.conj().T @ matrix - np.eye(dim))))


# =============================================================================
# Internal dynamics
# =============================================================================


def build_kicked_rotator(M: int, k: float) -> ComplexMatrix:
    """Kicked-rotator time step F_{mm'} on an M-dimensional torus.

    F_{mm'} = (iM)^{-1/2} exp[(i pi/M)(m-m')^2 - (iMk/4pi)(cos(2pi m/M) + cos(2pi m'/M))]

    The result is unitary and exactly symmetric.
    """
    if M < 1:
        raise InvalidParameterError(f"M must be >= 1, got {M}")

    m = np.arange(M, dtype=np.int64)
    d = m[:, None] - m[None, :]
    # exp(i pi x / M) has period 2M in the integer x
    free_phase = np.pi * ((d * d) % (2 * M)) / M

    cosines = np.cos(2.0 * np.pi * m / M)
    kick_phase = (M * k / (4.0 * np.pi)) * (cosines[:, None] + cosines[None, :])

    prefactor = 1.0 / np.sqrt(1j * M)
    F = prefactor * np.exp(1j * (free_phase - kick_phase))
    logger.debug("Built kicked rotator", extra={"M": M, "k": k})
    return F.astype(np.complex128)


def haar_unitary(M: int, rng: np.random.Generator) -> ComplexMatrix:
    """Haar-distributed U(M) element from QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M))) / np.sqrt(2.0)
    q, r = linalg.qr(z)
    # Q-R is unique once diag(R) is made positive: Q' = Q diag(phase(R_ii))
    diag = np.diagonal(r)
    q *= diag / np.abs(diag)
    return np.asarray(q, dtype=np.complex128)


def sample_coe(M: int, rng: Union[np.random.Generator, int]) -> ComplexMatrix:
    """Symmetric unitary F = U^T U from the circular orthogonal ensemble."""
    if M < 1:
        raise InvalidParameterError(f"M must be >= 1, got {M}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)

    U = haar_unitary(M, rng)
    F = U.T @ U
    # Remove the round-off asymmetry of the product.
    return 0.5 * (F + F.T)


def build_internal_dynamics(params: SystemParams) -> ComplexMatrix:
    if isinstance(params.dynamics, KickedRotatorDynamics):
        return build_kicked_rotator(params.M, params.dynamics.k)
    if isinstance(params.dynamics, COEDynamics):
        return sample_coe(params.M, np.random.default_rng(params.seed))
    raise InvalidParameterError(f"unknown dynamics {params.dynamics!r}")


# =============================================================================
# Coupling and composition
# =============================================================================


def _projectors(M: int, N: int) -> Tuple[ComplexMatrix, ComplexMatrix]:
    p_diag = np.zeros(M, dtype=np.complex128)
    p_diag[:N] = 1.0
    P = np.diag(p_diag)
    Q = np.eye(M, dtype=np.complex128) - P
    return P, Q


def build_coupling(M: int, N: int) -> Tuple[ComplexMatrix, ComplexMatrix]:
    """Coupling C = [[Q, -iP], [-iP, Q]] and its unitary square root.

    sqrt(C) = [[P/sqrt2 + Q, -iP/sqrt2], [-iP/sqrt2, P/sqrt2 + Q]].
    """
    if M < 1:
        raise InvalidParameterError(f"M must be >= 1, got {M}")
    if N < 1 or N > M:
        raise InvalidParameterError(f"need 1 <= N <= M, got N={N}, M={M}")

    P, Q = _projectors(M, N)
    C = np.block([[Q, -1j * P], [-1j * P, Q]])
    diag_block = SQRT_HALF * P + Q
    off_block = -1j * SQRT_HALF * P
    sqrtC = np.block([[diag_block, off_block], [off_block, diag_block]])
    return C, sqrtC


def assemble_pt_map(F: ComplexMatrix, mu: float, sqrtC: ComplexMatrix) -> ComplexMatrix:
    """PT-symmetric map sqrt(C) diag(e^{-mu} F, e^{mu} F^T) sqrt(C).

    F must be unitary: the right half uses F^T in place of [F^{-1}]^*.
    """
    F = validate_complex_matrix(F, "F")
    sqrtC = validate_complex_matrix(sqrtC, "sqrtC")
    M = F.shape[0]
    if sqrtC.shape[0] != 2 * M:
        raise InvalidParameterError(
            f"F is {M}x{M} but sqrtC is {sqrtC.shape[0]}x{sqrtC.shape[0]}; expected {2 * M}"
        )
    if mu < 0:
        raise InvalidParameterError(f"mu must be non-negative, got {mu}")

    gain_loss = np.zeros((2 * M, 2 * M), dtype=np.complex128)
    gain_loss[:M, :M] = np.exp(-mu) * F
    gain_loss[M:, M:] = np.exp(mu) * F.T
    return sqrtC @ gain_loss @ sqrtC


def build_pt_map(params: SystemParams) -> ComplexMatrix:
    F = build_internal_dynamics(params)
    _, sqrtC = build_coupling(params.M, params.N)
    logger.debug("Assembling PT map", extra={"system": params.describe()})
    return assemble_pt_map(F, params.mu, sqrtC)


def critical_mu(M: int, N: int) -> float:
    """mu_c = sqrt(N)/M, where random-matrix spectra turn complex."""
    return float(np.sqrt(N) / M)


# =============================================================================
# Parity and PT relation
# =============================================================================


def _half(dim: int) -> int:
    if dim % 2:
        raise InvalidParameterError(f"parity needs an even dimension 2M, got {dim}")
    return dim // 2


def split_state(psi: QuantumState) -> Tuple[QuantumState, QuantumState]:
    """(psi_L, psi_R): absorbing and amplifying halves."""
    psi = np.asarray(psi, dtype=np.complex128)
    if psi.ndim != 1:
        raise InvalidParameterError(f"state must be one-dimensional, got shape {psi.shape}")
    M = _half(psi.shape[0])
    return psi[:M], psi[M:]


def join_state(psi_L: QuantumState, psi_R: QuantumState) -> QuantumState:
    if np.shape(psi_L) != np.shape(psi_R):
        raise InvalidParameterError(
            f"halves differ in shape: {np.shape(psi_L)} vs {np.shape(psi_R)}"
        )
    return np.concatenate((psi_L, psi_R)).astype(np.complex128)


def parity_matrix(M: int) -> ComplexMatrix:
    """P = I_M (x) sigma_x in block form [[0, I], [I, 0]]."""
    eye = np.eye(M, dtype=np.complex128)
    zero = np.zeros((M, M), dtype=np.complex128)
    return np.block([[zero, eye], [eye, zero]])


def parity_apply(x: np.ndarray) -> np.ndarray:
    """Swap the L and R halves of a state, or conjugate a matrix by the parity."""
    arr = np.asarray(x)
    if arr.ndim == 1:
        M = _half(arr.shape[0])
        return np.concatenate((arr[M:], arr[:M]))
    if arr.ndim == 2 and arr.shape[0] == arr.shape[1]:
        M = _half(arr.shape[0])
        perm = np.roll(np.arange(2 * M), M)
        return arr[np.ix_(perm, perm)]
    raise InvalidParameterError(f"parity applies to states or square matrices, got {arr.shape}")


def pt_relation_residual(pt_map: ComplexMatrix) -> float:
    """max |P (F^{-1})^* P - F|, zero for an exactly PT-symmetric map."""
    pt_map = validate_complex_matrix(pt_map, "map")
    _half(pt_map.shape[0])
    inverse = linalg.inv(pt_map)
    return float(np.max(np.abs(parity_apply(inverse.conj()) - pt_map)))
