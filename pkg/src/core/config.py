"""Configuration management for PT-Weyl.

This module provides centralized runtime configuration using Pydantic Settings:
logging, numerical tolerances, default grid resolutions and the desk-scale
memory gate. Per-experiment parameters live in ``src.models.experiment``.
"""

from functools import lru_cache

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Runtime settings loaded from ``PTWEYL_*`` environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="PTWEYL_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # =============================================================================
    # Application Settings
    # =============================================================================
    app_name: str = Field(default="PT-Weyl", description="Application name")
    app_version: str = Field(default="0.1.0", description="Application version")
    log_level: str = Field(default="INFO", description="Logging level")

    # =============================================================================
    # Logging Configuration
    # =============================================================================
    log_format: str = Field(default="json", description="Log format (json or text)")
    log_file_enabled: bool = Field(default=False, description="Log file enabled")
    log_file_path: str = Field(default="./logs/ptweyl.log", description="Log file path")
    log_rotation_size: str = Field(default="10MB", description="Log rotation size")
    log_retention_days: int = Field(default=30, description="Rotated log files kept")
    task_events_enabled: bool = Field(default=True, description="Per-task event records")

    # =============================================================================
    # Execution
    # =============================================================================
    default_threads: int = Field(default=1, ge=1, description="Worker threads per sweep")
    max_desk_subspace_dim: int = Field(
        default=2000, ge=1, description="Largest M accepted without the large-system opt-in"
    )
    allow_large_systems: bool = Field(default=False, description="Opt-in for M above the gate")

    # =============================================================================
    # Numerical Tolerances
    # =============================================================================
    delta_real: float = Field(default=1e-8, gt=0, description="|Im E| below which E is real")
    pair_tol_relative: float = Field(
        default=1e-7, gt=0, description="PT pair matching tolerance relative to max|lambda|"
    )
    classify_atol: float = Field(
        default=1e-10, ge=0, description="Round-off margin on the +-mu/2 class thresholds"
    )
    qr_rank_rtol: float = Field(
        default=1e-10, gt=0, description="Relative pivot below which a basis is rank deficient"
    )

    # =============================================================================
    # Grids & Observables
    # =============================================================================
    husimi_resolution: int = Field(default=200, ge=1, description="Husimi grid points per axis")
    classical_resolution: int = Field(
        default=1000, ge=1, description="Classical grid cells per axis"
    )
    classical_t_max: int = Field(default=20, ge=1, description="Trapped-set horizon")
    histogram_bin_width: float = Field(default=0.01, gt=0, description="Im E histogram bin")

    # =============================================================================
    # Persistence & Metrics
    # =============================================================================
    csv_float_format: str = Field(default="%.17g", description="CSV float format")
    metrics_enabled: bool = Field(default=True, description="Write Prometheus text metrics")
    metrics_filename: str = Field(default="metrics.prom", description="Metrics file name")

    # =============================================================================
    # Validators
    # =============================================================================

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate log level."""
        allowed_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        if v.upper() not in allowed_levels:
            raise ValueError(f"log_level must be one of {allowed_levels}")
        return v.upper()

    @field_validator("log_format")
    @classmethod
    def validate_log_format(cls, v: str) -> str:
        """Validate log format."""
        allowed_formats = ["json", "text"]
        if v.lower() not in allowed_formats:
            raise ValueError(f"log_format must be one of {allowed_formats}")
        return v.lower()

    # =============================================================================
    # Properties
    # =============================================================================

    @property
    def software_version(self) -> str:
        """Version string recorded in run manifests."""
        return f"{self.app_name} {self.app_version}"


@lru_cache()
def get_settings() -> Settings:
    """Get cached application settings."""
    return Settings()


# Global settings instance
settings = get_settings()
