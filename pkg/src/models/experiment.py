"""Experiment configuration and run manifest models."""

import hashlib
import json
import math
from enum import Enum
from pathlib import Path
from typing import Annotated, List, Optional, Set

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    computed_field,
    field_validator,
    model_validator,
)

from src.core.config import settings
from src.models.system import SEED_MAX, COEDynamics, SystemParams

Seed = Annotated[int, Field(ge=0, le=SEED_MAX)]


class Observable(str, Enum):
    SPECTRUM = "spectrum"
    HISTOGRAM = "histogram"
    FRACTION = "fraction"
    SCALING = "scaling"
    HUSIMI = "husimi"
    CLASSICAL = "classical"
    TRANSITION = "transition"


class TaskStatus(str, Enum):
    COMPLETED = "completed"
    FAILED = "failed"
    SKIPPED = "skipped"


def n_channels_for(thouless_energy: float, M: int) -> int:
    """N = round(E_T * M), rounding halves up."""
    return int(math.floor(thouless_energy * M + 0.5))


class ExperimentConfig(BaseModel):
    """One sweep over system sizes, gain/loss rates and ensemble seeds."""

    model_config = ConfigDict(extra="forbid")

    system: SystemParams
    thouless_energy: Optional[float] = Field(
        default=None, gt=0.0, le=1.0, description="E_T = N/M; defaults to system.N/system.M"
    )
    mu_list: List[float] = Field(default_factory=list)
    mu_in_thouless_units: bool = Field(default=False, description="mu_list given in units of E_T")
    m_list: List[int] = Field(default_factory=list)
    ensemble_seeds: Optional[List[Seed]] = None
    ensemble_size: int = Field(default=1, ge=1)
    observables: Set[Observable] = Field(
        default_factory=lambda: {
            Observable.SPECTRUM,
            Observable.HISTOGRAM,
            Observable.FRACTION,
            Observable.SCALING,
        }
    )
    output_dir: Path = Path("results")

    # Grids
    husimi_resolution: int = Field(default_factory=lambda: settings.husimi_resolution, ge=1)
    classical_resolution: int = Field(
        default_factory=lambda: settings.classical_resolution, ge=1
    )
    classical_t_max: int = Field(default_factory=lambda: settings.classical_t_max, ge=1)
    coupling_t_max: int = Field(default=4, ge=1, description="Horizon of coupled-region maps")
    box_scales: List[int] = Field(default_factory=lambda: [1, 2, 4, 5, 10, 20, 25, 50])

    # Observables
    histogram_bin_width: float = Field(
        default_factory=lambda: settings.histogram_bin_width, gt=0.0
    )
    transition_mu_factors: List[float] = Field(
        default_factory=lambda: [0.0, 0.1, 0.3, 1.0, 3.0, 10.0]
    )

    # Tolerances
    delta_real: float = Field(default_factory=lambda: settings.delta_real, gt=0.0)
    pair_tol_relative: float = Field(default_factory=lambda: settings.pair_tol_relative, gt=0.0)

    allow_large_systems: bool = Field(default_factory=lambda: settings.allow_large_systems)

    @field_validator("mu_list")
    @classmethod
    def validate_mu_list(cls, v: List[float]) -> List[float]:
        if any(mu < 0 for mu in v):
            raise ValueError("mu values must be non-negative")
        return v

    @model_validator(mode="after")
    def validate_sizes(self) -> "ExperimentConfig":
        e_t = self.effective_thouless_energy
        for M in self.effective_m_list:
            n = n_channels_for(e_t, M)
            if n < 1 or n > M:
                raise ValueError(f"E_T={e_t:g} gives N={n} channels for M={M}")
            if M > settings.max_desk_subspace_dim and not self.allow_large_systems:
                raise ValueError(
                    f"M={M} exceeds the desk-scale limit {settings.max_desk_subspace_dim}; "
                    "enable allow_large_systems to run it"
                )
        if not self.ensemble_seeds and self.system.seed + self.ensemble_size - 1 > SEED_MAX:
            raise ValueError(
                f"seeds {self.system.seed}..{self.system.seed + self.ensemble_size - 1} "
                "exceed the u64 range"
            )
        return self

    # =============================================================================
    # Derived values
    # =============================================================================

    @property
    def effective_thouless_energy(self) -> float:
        if self.thouless_energy is not None:
            return self.thouless_energy
        return self.system.thouless_energy

    @property
    def effective_m_list(self) -> List[int]:
        return sorted(set(self.m_list)) if self.m_list else [self.system.M]

    @property
    def effective_mu_list(self) -> List[float]:
        mus = self.mu_list or [self.system.mu]
        if self.mu_in_thouless_units:
            mus = [mu * self.effective_thouless_energy for mu in mus]
        return sorted(set(mus))

    @property
    def effective_seeds(self) -> List[int]:
        if isinstance(self.system.dynamics, COEDynamics):
            if self.ensemble_seeds:
                return list(self.ensemble_seeds)
            return [self.system.seed + i for i in range(self.ensemble_size)]
        # The kicked rotator is one deterministic system.
        return [self.system.seed]

    def n_channels(self, M: int) -> int:
        return n_channels_for(self.effective_thouless_energy, M)

    def strip_width(self, M: int) -> float:
        return self.n_channels(M) / M

    def system_for(self, M: int, mu: float, seed: int) -> SystemParams:
        data = self.system.model_dump()
        data.update(M=M, N=self.n_channels(M), mu=mu, seed=seed)
        return SystemParams.model_validate(data)

    def config_hash(self) -> str:
        data = self.model_dump(mode="json")
        data["observables"] = sorted(data["observables"])
        canonical = json.dumps(data, sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ChannelLayout(BaseModel):
    """N and the classical strip width for one M, both derived from E_T."""

    M: int
    n_channels: int
    strip_width: float

    @model_validator(mode="after")
    def check_single_source(self) -> "ChannelLayout":
        if self.strip_width != self.n_channels / self.M:
            raise ValueError(
                f"strip width {self.strip_width} disagrees with N/M = {self.n_channels}/{self.M}"
            )
        return self


class TaskRecord(BaseModel):
    key: str
    kind: str
    status: TaskStatus
    wall_time_s: float = 0.0
    max_residual: Optional[float] = None
    outputs: List[str] = Field(default_factory=list)
    error: Optional[str] = None


class RunManifest(BaseModel):
    config_hash: str
    software_version: str
    thouless_energy: float
    channels: List[ChannelLayout] = Field(default_factory=list)
    tasks: List[TaskRecord] = Field(default_factory=list)

    @computed_field  # type: ignore[misc]
    @property
    def completed(self) -> int:
        return sum(1 for t in self.tasks if t.status == TaskStatus.COMPLETED)

    @computed_field  # type: ignore[misc]
    @property
    def failed(self) -> int:
        return sum(1 for t in self.tasks if t.status == TaskStatus.FAILED)

    @property
    def max_residual(self) -> Optional[float]:
        residuals = [t.max_residual for t in self.tasks if t.max_residual is not None]
        return max(residuals) if residuals else None
