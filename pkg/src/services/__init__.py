"""Numerical services for PT-Weyl.

Operators build the maps, spectra analyses their eigenvalues, husimi and
classical cover phase space, and the experiment runner drives sweeps and
persistence.
"""

from .experiment_runner import ExperimentRunner, load_config, run_experiment

__all__ = [
    "ExperimentRunner",
    "load_config",
    "run_experiment",
]
