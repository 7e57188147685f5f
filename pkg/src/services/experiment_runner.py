"""Parameter-sweep orchestration.

A run has two phases. First, one eigensolve task per (M, mu, seed) builds its
own map, diagonalizes it and writes the spectrum CSV; these tasks run in a
thread pool and their results are merged by task key. Second, the derived
observables (histograms, fractions, scaling fits, transition scans,
classical grids, Husimi supports) are computed from the merged spectra in a
fixed order. A failing task is recorded in the manifest and never stops its
siblings.
"""

import json
import threading
import time

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from src.core.config import settings
from src.core.errors import ConfigurationError, EmptyInputError, PTSymmetryViolation
from src.core.logging import get_logger, task_events
from src.core.metrics import RunMetrics
from src.models.experiment import (
    ChannelLayout,
    ExperimentConfig,
    Observable,
    RunManifest,
    TaskRecord,
    TaskStatus,
)
from src.models.phase_space import Direction, HusimiGrid
from src.models.spectral import ScalingFit, Spectrum
from src.models.system import KickedRotatorDynamics
from src.services import classical, husimi, persistence, spectra
from src.services.operators import build_pt_map

logger = get_logger(__name__)

SPECTRAL_OBSERVABLES = {
    Observable.SPECTRUM,
    Observable.HISTOGRAM,
    Observable.FRACTION,
    Observable.SCALING,
    Observable.HUSIMI,
}

FRACTION_COLUMNS = [
    "M", "N", "mu", "mu_over_et", "seeds", "f_amplified", "f_amplified_stderr",
    "f_real", "f_decaying",
]
SCALING_COLUMNS = ["mu", "mu_over_et", "points", "a", "a_stderr", "intercept", "d_H", "d_H_stderr"]
SCALING_POINT_COLUMNS = ["mu", "M", "f_amplified"]
TRANSITION_COLUMNS = ["M", "N", "mu_c", "factor", "mu", "seeds", "f_real", "f_real_stderr"]
DIMENSION_COLUMNS = ["source", "strip_width", "mu", "dimension", "stderr"]
HUSIMI_COLUMNS = [
    "subspace", "size", "mass_L", "mass_R", "normalized_mass",
    "pt_mirror_distance", "trapped_enrichment_R",
]

SpectrumKey = Tuple[int, float, int]


def _mu_tag(mu: float) -> str:
    return f"{mu:.6g}"


def _width_tag(width: float) -> str:
    return f"{width:.6g}"


def load_config(path: Path) -> ExperimentConfig:
    """Read an experiment configuration from TOML or JSON."""
    path = Path(path)
    try:
        if path.suffix == ".toml":
            with path.open("rb") as fh:
                data = tomllib.load(fh)
        elif path.suffix == ".json":
            with path.open("r", encoding="utf-8") as fh:
                data = json.load(fh)
        else:
            raise ConfigurationError("expected a .toml or .json file", path)
    except OSError as e:
        raise ConfigurationError(f"cannot read config: {e}", path) from e
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"malformed config: {e}", path) from e
    return validate_config(data, path)


def validate_config(data: Dict[str, Any], source: Optional[Path] = None) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(str(e), source) from e


class ExperimentRunner:
    """Runs one ExperimentConfig and writes all of its artifacts."""

    def __init__(self, config: ExperimentConfig, threads: Optional[int] = None):
        self.config = config
        self.threads = max(1, threads or settings.default_threads)
        self.output_dir = Path(config.output_dir)
        self.metrics = RunMetrics()
        self._lock = threading.Lock()
        self._records: List[TaskRecord] = []
        self._spectra: Dict[SpectrumKey, Spectrum] = {}
        self._fits: Dict[float, ScalingFit] = {}

    # =============================================================================
    # Task bookkeeping
    # =============================================================================

    def _relative(self, path: Path) -> str:
        return path.relative_to(self.output_dir).as_posix()

    def _append(self, record: TaskRecord) -> None:
        with self._lock:
            self._records.append(record)
            self.metrics.record_task(record.kind, record.status.value, record.wall_time_s)
            if record.max_residual is not None:
                self.metrics.record_residual(record.max_residual)

    def _run_task(
        self, key: str, kind: str, work: Callable[[], Tuple[List[Path], Optional[float]]]
    ) -> TaskRecord:
        """Execute ``work`` fail-soft; it returns the written paths and a solver residual."""
        task_events.log_task_started(key, kind)
        logger.set_context(task_key=key)
        start = time.perf_counter()
        try:
            outputs, residual = work()
        except Exception as e:
            wall = time.perf_counter() - start
            task_events.log_task_failed(key, kind, f"{type(e).__name__}: {e}")
            record = TaskRecord(
                key=key,
                kind=kind,
                status=TaskStatus.FAILED,
                wall_time_s=wall,
                error=f"{type(e).__name__}: {e}",
            )
        else:
            wall = time.perf_counter() - start
            record = TaskRecord(
                key=key,
                kind=kind,
                status=TaskStatus.COMPLETED,
                wall_time_s=wall,
                max_residual=residual,
                outputs=[self._relative(p) for p in outputs],
            )
            task_events.log_task_finished(
                key, kind, wall, {"outputs": len(outputs), "max_residual": residual}
            )
        finally:
            logger.clear_context()
        self._append(record)
        return record

    def _skip(self, key: str, kind: str, reason: str) -> None:
        logger.info("Task skipped", extra={"task_key": key, "reason": reason})
        self._append(TaskRecord(key=key, kind=kind, status=TaskStatus.SKIPPED, error=reason))

    # =============================================================================
    # Run
    # =============================================================================

    def _prepare_output_dir(self) -> None:
        try:
            self.output_dir.mkdir(parents=True, exist_ok=True)
            probe = self.output_dir / ".write-probe"
            probe.write_bytes(b"")
            probe.unlink()
        except OSError as e:
            raise ConfigurationError(f"output_dir {self.output_dir} is not writable: {e}") from e

    def channel_layouts(self) -> List[ChannelLayout]:
        return [
            ChannelLayout(
                M=M, n_channels=self.config.n_channels(M), strip_width=self.config.strip_width(M)
            )
            for M in self.config.effective_m_list
        ]

    def run(self) -> RunManifest:
        self._prepare_output_dir()
        start = time.perf_counter()
        observables = self.config.observables
        logger.info(
            "Starting run",
            extra={
                "config_hash": self.config.config_hash(),
                "m_list": self.config.effective_m_list,
                "mu_list": self.config.effective_mu_list,
                "seeds": self.config.effective_seeds,
                "observables": sorted(o.value for o in observables),
                "threads": self.threads,
            },
        )

        if observables & SPECTRAL_OBSERVABLES:
            self._run_eigensolves()
        if Observable.HISTOGRAM in observables:
            self._run_histograms()
        if Observable.FRACTION in observables:
            self._run_fraction_table()
        if Observable.SCALING in observables:
            self._run_scaling()
        if Observable.TRANSITION in observables:
            self._run_transition()
        if Observable.CLASSICAL in observables:
            self._run_classical()
        if Observable.HUSIMI in observables:
            self._run_husimi()

        manifest = RunManifest(
            config_hash=self.config.config_hash(),
            software_version=settings.software_version,
            thouless_energy=self.config.effective_thouless_energy,
            channels=self.channel_layouts(),
            tasks=sorted(self._records, key=lambda r: r.key),
        )
        if settings.metrics_enabled:
            self.metrics.write(self.output_dir / settings.metrics_filename)
        persistence.write_manifest(manifest, self.output_dir / "manifest.json")
        task_events.log_run_summary(
            manifest.completed, manifest.failed, time.perf_counter() - start
        )
        return manifest

    # =============================================================================
    # Eigensolves
    # =============================================================================

    def _spectrum_key(self, M: int, mu: float, seed: int) -> str:
        return f"spectrum/M={M:06d}/mu={_mu_tag(mu)}/seed={seed}"

    def _eigensolve(self, M: int, mu: float, seed: int) -> Tuple[List[Path], Optional[float]]:
        params = self.config.system_for(M, mu, seed)
        keep_vectors = (
            Observable.HUSIMI in self.config.observables
            and seed == self.config.effective_seeds[0]
        )
        pt_map = build_pt_map(params)
        spec = spectra.eigendecompose(pt_map, want_vectors=keep_vectors)
        del pt_map

        tol = self.config.pair_tol_relative * max(1.0, float(np.max(np.abs(spec.lambdas))))
        try:
            spectra.pair_match(spec.lambdas, tol)
        except PTSymmetryViolation as e:
            logger.warning(
                "Spectrum not PT-paired within tolerance",
                extra={"system": params.describe(), "unmatched": e.unmatched},
            )

        path = persistence.emit_spectrum_csv(
            spec,
            self.output_dir / "spectra" / f"spectrum_M{M}_mu{_mu_tag(mu)}_seed{seed}.csv",
        )
        with self._lock:
            self._spectra[(M, mu, seed)] = spec
        return [path], spec.max_residual

    def _run_eigensolves(self) -> None:
        jobs = {
            self._spectrum_key(M, mu, seed): (M, mu, seed)
            for M in self.config.effective_m_list
            for mu in self.config.effective_mu_list
            for seed in self.config.effective_seeds
        }

        def submit(key: str) -> TaskRecord:
            M, mu, seed = jobs[key]
            return self._run_task(key, "spectrum", lambda: self._eigensolve(M, mu, seed))

        keys = sorted(jobs)
        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                futures = {key: pool.submit(submit, key) for key in keys}
                results = {key: futures[key].result() for key in keys}
        else:
            results = {key: submit(key) for key in keys}

        failed = sum(1 for r in results.values() if r.status == TaskStatus.FAILED)
        logger.info("Eigensolves finished", extra={"tasks": len(keys), "failed": failed})

    def _ensemble(self, M: int, mu: float) -> List[Spectrum]:
        """Completed spectra of one (M, mu) in seed order."""
        return [
            self._spectra[(M, mu, seed)]
            for seed in self.config.effective_seeds
            if (M, mu, seed) in self._spectra
        ]

    # =============================================================================
    # Derived observables
    # =============================================================================

    def _run_histograms(self) -> None:
        for M in self.config.effective_m_list:
            for mu in self.config.effective_mu_list:

                def work(M: int = M, mu: float = mu) -> Tuple[List[Path], Optional[float]]:
                    hist = spectra.im_e_histogram(
                        self._ensemble(M, mu), self.config.histogram_bin_width
                    )
                    path = persistence.emit_histogram_csv(
                        hist,
                        self.output_dir / "histograms" / f"histogram_M{M}_mu{_mu_tag(mu)}.csv",
                    )
                    return [path], None

                self._run_task(f"histogram/M={M:06d}/mu={_mu_tag(mu)}", "histogram", work)

    def _fraction_rows(self) -> List[Dict[str, Any]]:
        e_t = self.config.effective_thouless_energy
        rows = []
        for M in self.config.effective_m_list:
            for mu in self.config.effective_mu_list:
                ensemble = self._ensemble(M, mu)
                if not ensemble:
                    continue
                mean, stderr = spectra.ensemble_fraction(ensemble, mu)
                classes = [spectra.classify(s, mu, self.config.delta_real) for s in ensemble]
                rows.append(
                    {
                        "M": M,
                        "N": self.config.n_channels(M),
                        "mu": mu,
                        "mu_over_et": mu / e_t,
                        "seeds": len(ensemble),
                        "f_amplified": mean,
                        "f_amplified_stderr": stderr,
                        "f_real": float(np.mean([c.real_states.size / c.total for c in classes])),
                        "f_decaying": float(np.mean([c.decaying.size / c.total for c in classes])),
                    }
                )
        return rows

    def _run_fraction_table(self) -> None:
        def work() -> Tuple[List[Path], Optional[float]]:
            rows = self._fraction_rows()
            if not rows:
                raise EmptyInputError("no completed spectra to tabulate")
            return [
                persistence.emit_table_csv(rows, self.output_dir / "fraction.csv", FRACTION_COLUMNS)
            ], None

        self._run_task("fraction", "fraction", work)

    def _run_scaling(self) -> None:
        m_list = self.config.effective_m_list
        if len(m_list) < 3:
            self._skip("scaling", "scaling", f"power-law fits need 3 system sizes, got {m_list}")
            return

        e_t = self.config.effective_thouless_energy
        point_rows: List[Dict[str, Any]] = []
        fit_rows: List[Dict[str, Any]] = []

        for mu in self.config.effective_mu_list:

            def work(mu: float = mu) -> Tuple[List[Path], Optional[float]]:
                points = []
                for M in m_list:
                    ensemble = self._ensemble(M, mu)
                    if ensemble:
                        points.append((M, spectra.ensemble_fraction(ensemble, mu)[0]))
                point_rows.extend({"mu": mu, "M": M, "f_amplified": f} for M, f in points)
                fit = spectra.fit_power_law(points)
                dimension = spectra.estimate_fractal_dimension(fit)
                self._fits[mu] = fit
                fit_rows.append(
                    {
                        "mu": mu,
                        "mu_over_et": mu / e_t,
                        "points": len(fit.points),
                        "a": fit.exponent_a,
                        "a_stderr": fit.stderr_a,
                        "intercept": fit.intercept,
                        "d_H": dimension.value,
                        "d_H_stderr": dimension.stderr,
                    }
                )
                logger.info(
                    "Scaling fit",
                    extra={"mu": mu, "a": fit.exponent_a, "a_stderr": fit.stderr_a},
                )
                path = persistence.emit_table_csv(
                    [fit_rows[-1]],
                    self.output_dir / "scaling" / f"fit_mu{_mu_tag(mu)}.csv",
                    SCALING_COLUMNS,
                )
                return [path], None

            self._run_task(f"scaling/mu={_mu_tag(mu)}", "scaling", work)

        def tables() -> Tuple[List[Path], Optional[float]]:
            return [
                persistence.emit_table_csv(
                    point_rows, self.output_dir / "scaling_points.csv", SCALING_POINT_COLUMNS
                ),
                persistence.emit_table_csv(
                    fit_rows, self.output_dir / "scaling.csv", SCALING_COLUMNS
                ),
            ], None

        self._run_task("scaling/tables", "scaling", tables)

    def _run_transition(self) -> None:
        factors = sorted(self.config.transition_mu_factors)
        rows: List[Dict[str, Any]] = []
        for M in self.config.effective_m_list:

            def work(M: int = M) -> Tuple[List[Path], Optional[float]]:
                base = self.config.system_for(M, 0.0, self.config.system.seed)
                mu_c = base.critical_mu
                mu_grid = [f * mu_c for f in factors]
                scans = np.array(
                    [
                        spectra.critical_mu_scan(
                            self.config.system_for(M, 0.0, seed), mu_grid, self.config.delta_real
                        )
                        for seed in self.config.effective_seeds
                    ]
                )
                n = scans.shape[0]
                if n > 1:
                    stderr = scans.std(axis=0, ddof=1) / np.sqrt(n)
                else:
                    stderr = np.zeros(len(factors))
                size_rows = []
                for i, factor in enumerate(factors):
                    size_rows.append(
                        {
                            "M": M,
                            "N": base.N,
                            "mu_c": mu_c,
                            "factor": factor,
                            "mu": mu_grid[i],
                            "seeds": n,
                            "f_real": float(scans[:, i].mean()),
                            "f_real_stderr": float(stderr[i]),
                        }
                    )
                rows.extend(size_rows)
                path = persistence.emit_table_csv(
                    size_rows,
                    self.output_dir / "transition" / f"transition_M{M}.csv",
                    TRANSITION_COLUMNS,
                )
                return [path], None

            self._run_task(f"transition/M={M:06d}", "transition", work)

        def table() -> Tuple[List[Path], Optional[float]]:
            return [
                persistence.emit_table_csv(
                    rows, self.output_dir / "transition.csv", TRANSITION_COLUMNS
                )
            ], None

        self._run_task("transition/table", "transition", table)

    def _kicking_strength(self) -> Optional[float]:
        dynamics = self.config.system.dynamics
        return dynamics.k if isinstance(dynamics, KickedRotatorDynamics) else None

    def _run_classical(self) -> None:
        k = self._kicking_strength()
        widths = sorted({self.config.strip_width(M) for M in self.config.effective_m_list})
        if k is None:
            for width in widths:
                self._skip(
                    f"classical/w={_width_tag(width)}", "classical",
                    "random-matrix dynamics has no classical map",
                )
            return

        n = self.config.classical_resolution
        resolution = (n, n)
        scales = [s for s in self.config.box_scales if n % s == 0]
        rows: List[Dict[str, Any]] = []

        for width in widths:

            def work(width: float = width) -> Tuple[List[Path], Optional[float]]:
                base = self.output_dir / "classical" / f"w{_width_tag(width)}"
                outputs: List[Path] = []
                for direction in (Direction.BACKWARD, Direction.FORWARD):
                    grid = classical.coupled_regions(
                        k, width, self.config.classical_t_max, resolution, direction,
                        workers=self.threads,
                    )
                    name = direction.value
                    outputs.append(
                        persistence.emit_grid_csv(grid.as_float(), base / f"{name}_passage.csv")
                    )
                    previous = None
                    for t in range(1, min(self.config.coupling_t_max, grid.t_max) + 1):
                        region = classical.coupled_within(grid, t)
                        if previous is not None and np.any(previous & ~region):
                            raise AssertionError(f"coupled regions not nested at t={t}")
                        previous = region
                        outputs.append(
                            persistence.emit_grid_pgm(region, base / f"{name}_coupled_t{t}.pgm")
                        )
                    trapped = classical.trapped_set_indicator(grid)
                    outputs.append(persistence.emit_grid_csv(trapped, base / f"{name}_trapped.csv"))
                    outputs.append(persistence.emit_grid_pgm(trapped, base / f"{name}_trapped.pgm"))
                    box = classical.box_counting_dimension(trapped, scales)
                    rows.append(
                        {
                            "source": f"box_counting_{name}_trapped",
                            "strip_width": width,
                            "mu": float("nan"),
                            "dimension": box.dimension,
                            "stderr": box.stderr,
                        }
                    )
                return outputs, None

            self._run_task(f"classical/w={_width_tag(width)}", "classical", work)

        def table() -> Tuple[List[Path], Optional[float]]:
            fweyl = [
                {
                    "source": "fractal_weyl",
                    "strip_width": self.config.effective_thouless_energy,
                    "mu": mu,
                    "dimension": 2.0 - fit.exponent_a,
                    "stderr": fit.stderr_a,
                }
                for mu, fit in sorted(self._fits.items())
            ]
            return [
                persistence.emit_table_csv(
                    rows + fweyl, self.output_dir / "dimensions.csv", DIMENSION_COLUMNS
                )
            ], None

        self._run_task("classical/dimensions", "classical", table)

    def _backward_trapped(self, width: float, n: int) -> Optional[np.ndarray]:
        """Complement of the region coupled within coupling_t_max backward steps."""
        k = self._kicking_strength()
        if k is None:
            return None
        grid = classical.coupled_regions(
            k, width, self.config.coupling_t_max, (n, n), Direction.BACKWARD
        )
        return classical.trapped_set_indicator(grid)

    def _run_husimi(self) -> None:
        seed = self.config.effective_seeds[0]
        n = self.config.husimi_resolution
        resolution = (n, n)

        for M in self.config.effective_m_list:
            for mu in self.config.effective_mu_list:

                def work(M: int = M, mu: float = mu) -> Tuple[List[Path], Optional[float]]:
                    spec = self._spectra.get((M, mu, seed))
                    if spec is None:
                        raise EmptyInputError(f"no spectrum for M={M} mu={mu:g} seed={seed}")
                    classes = spectra.classify(spec, mu, self.config.delta_real)
                    grids: Dict[str, HusimiGrid] = {
                        "amplified": husimi.subspace_grid(
                            spec, classes.amplified, M, resolution, self.threads
                        ),
                        "neutral": husimi.subspace_grid(
                            spec, classes.neutral, M, resolution, self.threads
                        ),
                        "decaying": husimi.subspace_grid(
                            spec, classes.decaying, M, resolution, self.threads
                        ),
                    }
                    mirror = {
                        "amplified": "decaying",
                        "neutral": "neutral",
                        "decaying": "amplified",
                    }
                    sizes = {
                        "amplified": classes.amplified.size,
                        "neutral": classes.neutral.size,
                        "decaying": classes.decaying.size,
                    }
                    trapped = self._backward_trapped(self.config.strip_width(M), n)

                    base = self.output_dir / "husimi" / f"M{M}_mu{_mu_tag(mu)}"
                    outputs: List[Path] = []
                    rows = []
                    for name, grid in grids.items():
                        for half, values in (("L", grid.values_L), ("R", grid.values_R)):
                            stem = base / f"{name}_{half}"
                            outputs.append(persistence.emit_grid_csv(values, f"{stem}.csv"))
                            outputs.append(persistence.emit_grid_pgm(values, f"{stem}.pgm"))
                        enrichment = float("nan")
                        if trapped is not None and grid.mass_R > 0.0 and trapped.any():
                            enrichment = husimi.region_enrichment(grid.values_R, trapped)
                        rows.append(
                            {
                                "subspace": name,
                                "size": sizes[name],
                                "mass_L": grid.mass_L,
                                "mass_R": grid.mass_R,
                                "normalized_mass": grid.normalized_mass(M),
                                "pt_mirror_distance": husimi.grid_distance(
                                    grids[mirror[name]], husimi.pt_transform_grid(grid)
                                ),
                                "trapped_enrichment_R": enrichment,
                            }
                        )
                    outputs.append(
                        persistence.emit_table_csv(rows, base / "summary.csv", HUSIMI_COLUMNS)
                    )
                    return outputs, spec.max_residual

                self._run_task(f"husimi/M={M:06d}/mu={_mu_tag(mu)}", "husimi", work)


def run_experiment(config: ExperimentConfig, threads: Optional[int] = None) -> RunManifest:
    """Execute every task of ``config`` and return the manifest written to its output_dir."""
    return ExperimentRunner(config, threads=threads).run()
