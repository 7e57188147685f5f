"""Prometheus run metrics for PT-Weyl sweeps.

Each run owns its registry, so repeated runs in one process (tests, notebooks)
never collide on metric names.
"""

import threading
from pathlib import Path

from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, write_to_textfile

from src.core.errors import OutputError

TASK_DURATION_BUCKETS = (0.01, 0.1, 0.5, 1.0, 5.0, 15.0, 60.0, 300.0, 900.0, 3600.0)


class RunMetrics:
    """Task counters, durations and the worst solver residual of one run."""

    def __init__(self) -> None:
        self.registry = CollectorRegistry()
        self.tasks_total = Counter(
            "ptweyl_tasks_total",
            "Total sweep tasks",
            ["kind", "status"],
            registry=self.registry,
        )
        self.task_duration = Histogram(
            "ptweyl_task_duration_seconds",
            "Sweep task wall time",
            ["kind"],
            buckets=TASK_DURATION_BUCKETS,
            registry=self.registry,
        )
        self.max_residual = Gauge(
            "ptweyl_max_solver_residual",
            "Largest eigenpair residual seen in the run",
            registry=self.registry,
        )
        self._max_residual_value = 0.0
        self._residual_lock = threading.Lock()

    def record_task(self, kind: str, status: str, wall_time_s: float) -> None:
        self.tasks_total.labels(kind=kind, status=status).inc()
        self.task_duration.labels(kind=kind).observe(wall_time_s)

    def record_residual(self, residual: float) -> None:
        with self._residual_lock:
            if residual > self._max_residual_value:
                self._max_residual_value = residual
                self.max_residual.set(residual)

    def write(self, path: Path) -> None:
        try:
            write_to_textfile(str(path), self.registry)
        except OSError as e:
            raise OutputError(path, str(e)) from e
