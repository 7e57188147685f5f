"""System parameters of a PT-symmetric resonator and the matrix carrier type."""

from typing import Annotated, Literal, Union

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, model_validator

# Dense square complex matrix: F, F^T, C, sqrt(C), the parity operator and the PT map.
ComplexMatrix = npt.NDArray[np.complex128]

# 2M amplitudes (psi_L, psi_R): absorbing half first, amplifying half second.
QuantumState = npt.NDArray[np.complex128]

SEED_MAX = 2**64 - 1


class KickedRotatorDynamics(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["kicked_rotator"] = "kicked_rotator"
    k: float = Field(default=8.0, description="Kicking strength")


class COEDynamics(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["coe"] = "coe"


Dynamics = Annotated[
    Union[KickedRotatorDynamics, COEDynamics],
    Field(discriminator="kind"),
]


class SystemParams(BaseModel):
    """Full specification of one resonator: sizes, gain/loss rate, dynamics, seed."""

    model_config = ConfigDict(frozen=True)

    M: int = Field(ge=1, description="Subspace dimension (1/h)")
    N: int = Field(ge=1, description="Interface channels")
    mu: float = Field(default=0.0, ge=0.0, description="Amplification/absorption rate per step")
    dynamics: Dynamics = Field(default_factory=KickedRotatorDynamics)
    seed: int = Field(default=0, ge=0, le=SEED_MAX, description="RNG seed (COE only)")

    @model_validator(mode="after")
    def check_channels(self) -> "SystemParams":
        if self.N > self.M:
            raise ValueError(f"N={self.N} exceeds M={self.M}")
        return self

    @property
    def thouless_energy(self) -> float:
        """E_T = N/M, the inverse mean dwell time in each half."""
        return self.N / self.M

    @property
    def critical_mu(self) -> float:
        """Random-matrix scale mu_c = sqrt(N)/M of spontaneous PT breaking."""
        return float(np.sqrt(self.N) / self.M)

    def describe(self) -> str:
        if isinstance(self.dynamics, KickedRotatorDynamics):
            dyn = f"kr(k={self.dynamics.k:g})"
        else:
            dyn = f"coe(seed={self.seed})"
        return f"M={self.M} N={self.N} mu={self.mu:g} {dyn}"
