"""Domain models for PT-Weyl.

Pydantic models describe configurations and manifests; frozen dataclasses
carry numpy arrays for numerical results.
"""

from .experiment import (
    ChannelLayout,
    ExperimentConfig,
    Observable,
    RunManifest,
    TaskRecord,
    TaskStatus,
)
from .phase_space import (
    NEVER,
    BoxCountResult,
    CoherentState,
    Direction,
    HusimiGrid,
    PassageTimeGrid,
    PhasePoint,
)
from .spectral import FractalDimension, ImEHistogram, ScalingFit, SpectralClassification, Spectrum
from .system import COEDynamics, ComplexMatrix, KickedRotatorDynamics, QuantumState, SystemParams

__all__ = [
    "NEVER",
    "BoxCountResult",
    "COEDynamics",
    "ChannelLayout",
    "CoherentState",
    "ComplexMatrix",
    "Direction",
    "ExperimentConfig",
    "FractalDimension",
    "HusimiGrid",
    "ImEHistogram",
    "KickedRotatorDynamics",
    "Observable",
    "PassageTimeGrid",
    "PhasePoint",
    "QuantumState",
    "RunManifest",
    "ScalingFit",
    "SpectralClassification",
    "Spectrum",
    "SystemParams",
    "TaskRecord",
    "TaskStatus",
]
