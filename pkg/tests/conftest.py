"""Shared fixtures: small maps, a scratch output directory and a small sweep."""

from pathlib import Path

import numpy as np
import pytest

from src.core.config import settings
from src.models.experiment import ExperimentConfig, Observable
from src.models.system import COEDynamics, KickedRotatorDynamics, SystemParams
from src.services.operators import build_pt_map

SMALL_M = 20
SMALL_N = 4  # E_T = 1/5


@pytest.fixture
def kr_params() -> SystemParams:
    return SystemParams(M=50, N=10, mu=0.2, dynamics=KickedRotatorDynamics(k=8.0))


@pytest.fixture
def kr_map(kr_params: SystemParams) -> np.ndarray:
    return build_pt_map(kr_params)


@pytest.fixture
def coe_params() -> SystemParams:
    return SystemParams(M=40, N=8, mu=0.2, dynamics=COEDynamics(), seed=7)


@pytest.fixture
def coe_map(coe_params: SystemParams) -> np.ndarray:
    return build_pt_map(coe_params)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def output_dir(tmp_path: Path) -> Path:
    return tmp_path / "results"


@pytest.fixture
def quiet_settings(monkeypatch: pytest.MonkeyPatch):
    """Settings with metrics off and task events muted."""
    monkeypatch.setattr(settings, "metrics_enabled", False)
    monkeypatch.setattr(settings, "task_events_enabled", False)
    return settings


@pytest.fixture
def small_config(output_dir: Path) -> ExperimentConfig:
    return ExperimentConfig(
        system=SystemParams(M=SMALL_M, N=SMALL_N, dynamics=KickedRotatorDynamics(k=8.0)),
        m_list=[20, 30, 40],
        mu_list=[0.4],
        observables={
            Observable.SPECTRUM,
            Observable.HISTOGRAM,
            Observable.FRACTION,
            Observable.SCALING,
        },
        output_dir=output_dir,
    )
