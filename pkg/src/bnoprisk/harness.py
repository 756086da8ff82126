"""Experiment configuration, seeding and the three reproduction runs.

Seeds: every random stream is derived from the master seed with
``numpy.random.SeedSequence(master_seed, spawn_key=key)``. Generator runs use
``key = (realization, 0)``; VaR sampling for window ``T`` uses
``key = (realization, 1, T)``. Adding realizations or windows therefore never
changes the streams of existing ones.
"""

from __future__ import annotations

import contextlib
import csv
import logging
import os
import shutil
import tempfile
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterator

import numpy as np

from bnoprisk import io
from bnoprisk.aggregate import extract
from bnoprisk.bnlearn import discretize, learn_cpts, learn_structure, marginal
from bnoprisk.corrstats import CorrelationTarget, LossMatrix, empirical_correlation, fit_decay_time
from bnoprisk.synthgen import GeneratorConfig, GeneratorReport, run
from bnoprisk.varengine import var_report

log = logging.getLogger(__name__)

DEFAULT_GRID = (1, 5, 10, 20, 40, 60, 80, 100, 120, 140, 160, 180, 200, 220, 240)
OUTPUT_ENV = "BNOPRISK_OUTPUT_DIR"

STAGE_GENERATE = 0
STAGE_VAR = 1


class ConfigFileError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    n_processes: int = 3
    length: int = 5000
    tau: float = 25.0
    means: tuple[float, ...] = (100.0, 50.0, 10.0)
    labels: tuple[str, ...] = ()
    basin_factor: float = 2.0
    plateau_window: int = 10_000
    max_iterations: int = 10_000_000
    max_lag: int | None = None
    trace_every: int = 1000
    window_grid: tuple[int, ...] = DEFAULT_GRID
    window: int | None = None
    realizations: int = 30
    horizon: int | None = None
    repetitions: int = 100
    n_states: int = 5
    structure_mode: str = "greedy"
    fig1_window: int = 25
    master_seed: int = 0
    output_dir: str = field(default_factory=lambda: os.environ.get(OUTPUT_ENV, "bnoprisk-out"))

    def __post_init__(self) -> None:
        self.means = tuple(float(m) for m in self.means)
        self.window_grid = tuple(int(t) for t in self.window_grid)
        if not self.labels:
            self.labels = tuple(f"p{i + 1}" for i in range(self.n_processes))
        self.labels = tuple(self.labels)
        if len(self.means) != self.n_processes or len(self.labels) != self.n_processes:
            raise ConfigFileError("means and labels need one entry per process")
        if self.realizations < 1:
            raise ConfigFileError("realizations must be >= 1")
        if not self.window_grid or any(t < 1 or t > self.length for t in self.window_grid):
            raise ConfigFileError(f"every window must lie in 1..{self.length}")
        if self.window is not None and not 1 <= self.window <= self.length:
            raise ConfigFileError(f"window must lie in 1..{self.length}")
        if self.structure_mode not in ("greedy", "exhaustive"):
            raise ConfigFileError(f"unknown structure_mode {self.structure_mode!r}")
        if self.horizon is not None and self.horizon < 1:
            raise ConfigFileError("horizon must be positive")

    @property
    def effective_horizon(self) -> int:
        return self.length if self.horizon is None else int(self.horizon)

    def target(self) -> CorrelationTarget:
        return CorrelationTarget.homogeneous(self.n_processes, self.tau, self.max_lag)

    def generator(self, realization: int) -> GeneratorConfig:
        return GeneratorConfig(
            n_processes=self.n_processes,
            length=self.length,
            target=self.target(),
            means=self.means,
            basin_factor=self.basin_factor,
            plateau_window=self.plateau_window,
            max_iterations=self.max_iterations,
            seed=derive_seed(self.master_seed, realization, STAGE_GENERATE),
            trace_every=self.trace_every,
            process_labels=list(self.labels),
        )


_LIST_KEYS = {"means": float, "labels": str, "window_grid": int}
_OPTIONAL_INT = {"max_lag", "horizon", "window"}


def parse_config(text: str) -> ExperimentConfig:
    """Flat ``key = value`` lines; ``#`` starts a comment; lists are comma separated."""
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    kwargs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (p.strip() for p in line.partition("="))
        if not sep or not key:
            raise ConfigFileError(f"line {lineno}: expected 'key = value'")
        if key not in types:
            raise ConfigFileError(f"line {lineno}: unknown key {key!r}")
        try:
            if key in _LIST_KEYS:
                conv = _LIST_KEYS[key]
                kwargs[key] = tuple(conv(v.strip()) for v in value.split(",") if v.strip())
            elif key in _OPTIONAL_INT:
                kwargs[key] = None if value.lower() in ("", "none") else int(value)
            elif key in ("tau", "basin_factor"):
                kwargs[key] = float(value)
            elif key in ("structure_mode", "output_dir"):
                kwargs[key] = value
            else:
                kwargs[key] = int(value)
        except ValueError:
            raise ConfigFileError(f"line {lineno}: bad value {value!r} for {key}") from None
    return ExperimentConfig(**kwargs)


def load_config(path: str | os.PathLike | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    return parse_config(Path(path).read_text())


def derive_seed(master_seed: int, *key: int) -> int:
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@contextlib.contextmanager
def staged_output(out_dir: str | os.PathLike) -> Iterator[Path]:
    """Write into a scratch directory and move the files into ``out_dir`` only on success."""
    out = Path(out_dir)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        yield tmp
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    out.mkdir(parents=True, exist_ok=True)
    for item in sorted(tmp.rglob("*")):
        dest = out / item.relative_to(tmp)
        if item.is_dir():
            dest.mkdir(parents=True, exist_ok=True)
        else:
            dest.parent.mkdir(parents=True, exist_ok=True)
            os.replace(item, dest)
    shutil.rmtree(tmp, ignore_errors=True)


# -- pipeline -----------------------------------------------------------------

@dataclass
class WindowResult:
    realization: int
    window: int
    n_records: int
    edges: list[tuple[int, int]]
    total_var: float
    per_process_var: np.ndarray


def generate_realization(cfg: ExperimentConfig, realization: int) -> tuple[LossMatrix, GeneratorReport]:
    series, report = run(cfg.generator(realization))
    log.info("realization %d: objective %.3g -> %.3g after %d proposals (%s)",
             realization, report.initial_objective, report.final_objective,
             report.proposals, report.halted_by)
    return series, report


def analyze_window(series: LossMatrix, window: int, cfg: ExperimentConfig, realization: int):
    """Extract, discretize, learn, and compute the VaR for one window."""
    db = extract(series, window)
    states, disc = discretize(db, cfg.n_states)
    dag = learn_structure(states, cfg.structure_mode, cfg.n_states)
    net = learn_cpts(dag, states, cfg.n_states, db.process_labels)
    marginals = [marginal(net, i, disc) for i in range(series.n_processes)]
    rng = np.random.default_rng(derive_seed(cfg.master_seed, realization, STAGE_VAR, window))
    report = var_report(marginals, window, cfg.effective_horizon, cfg.repetitions, rng,
                        process_labels=db.process_labels)
    return db, dag, net, disc, report


def sweep(cfg: ExperimentConfig, series_list: list[LossMatrix] | None = None) -> list[WindowResult]:
    """Full pipeline for every realization and every window of the grid."""
    results = []
    for r in range(cfg.realizations):
        series = series_list[r] if series_list is not None else generate_realization(cfg, r)[0]
        for t in cfg.window_grid:
            db, dag, _, _, rep = analyze_window(series, t, cfg, r)
            results.append(WindowResult(r, t, db.n_records, dag.sorted_edges(),
                                        rep.total_var, rep.per_process_var))
    return results


def summarize_fig2(results: list[WindowResult], grid) -> list[tuple[int, float, float, int]]:
    rows = []
    for t in grid:
        vals = np.array([w.total_var for w in results if w.window == t])
        std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        rows.append((int(t), float(vals.mean()), std, int(vals.size)))
    return rows


# -- experiments --------------------------------------------------------------

def correlation_rows(series: LossMatrix, window: int, max_lag: int, tau: float,
                     pair=(0, 1)) -> list[tuple[int, float, float]]:
    """(lag, c_ij, C_ij) for the series summed over ``window`` steps."""
    agg = extract(series, window).as_loss_matrix()
    max_lag = min(max_lag, agg.length - 2)
    est = empirical_correlation(agg, max_lag)
    i, j = pair
    scaled = tau / window
    return [(t, float(est.c[i, j, t]), float(np.exp(-t / scaled))) for t in range(max_lag + 1)]


def _write_corr_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lag", "c_12", "C_12"])
        for t, c, target in rows:
            w.writerow([t, repr(c), repr(target)])


def _safe_fit(rows) -> float:
    try:
        return fit_decay_time([c for _, c, _ in rows])
    except ValueError:
        return float("nan")


def experiment_fig1(cfg: ExperimentConfig, out_dir=None) -> dict[str, float]:
    """Imposed vs obtained c_12, raw (1000 lags) and summed over ``fig1_window`` (40 lags)."""
    out_dir = Path(out_dir or cfg.output_dir)
    series, report = generate_realization(cfg, 0)
    raw = correlation_rows(series, 1, 1000, cfg.tau)
    agg = correlation_rows(series, cfg.fig1_window, 40, cfg.tau)
    summary = {
        "fitted_decay_raw": _safe_fit(raw),
        "fitted_decay_aggregated": _safe_fit(agg),
        "expected_decay_aggregated": cfg.tau / cfg.fig1_window,
    }
    with staged_output(out_dir) as tmp:
        io.write_series(series, tmp / "series.csv")
        io.write_report(report, tmp / "generator_report.txt")
        io.write_trace(report, tmp / "objective_trace.csv")
        _write_corr_csv(raw, tmp / "fig1_raw.csv")
        _write_corr_csv(agg, tmp / f"fig1_T{cfg.fig1_window}.csv")
        (tmp / "fig1_summary.txt").write_text(
            "".join(f"{k} = {v!r}\n" for k, v in summary.items()))
    return summary


def experiment_table1(cfg: ExperimentConfig, out_dir=None,
                      series_list: list[LossMatrix] | None = None) -> list[WindowResult]:
    """Learned edge list for every realization and window."""
    out_dir = Path(out_dir or cfg.output_dir)
    results = []
    with staged_output(out_dir) as tmp:
        for r in range(cfg.realizations):
            series = series_list[r] if series_list is not None else generate_realization(cfg, r)[0]
            for t in cfg.window_grid:
                db = extract(series, t)
                states, _ = discretize(db, cfg.n_states)
                dag = learn_structure(states, cfg.structure_mode, cfg.n_states)
                path = tmp / "table1" / f"r{r:03d}" / f"T{t:03d}.edges"
                path.parent.mkdir(parents=True, exist_ok=True)
                io.write_edges(dag, list(series.process_labels), path)
                results.append(WindowResult(r, t, db.n_records, dag.sorted_edges(), float("nan"),
                                            np.array([])))
        with open(tmp / "table1_links.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["realization", "window", "records", "n_edges"])
            for res in results:
                w.writerow([res.realization, res.window, res.n_records, len(res.edges)])
    return results


def experiment_fig2(cfg: ExperimentConfig, out_dir=None,
                    series_list: list[LossMatrix] | None = None) -> list[tuple[int, float, float, int]]:
    """Mean and standard deviation of the total VaR over realizations, per window."""
    out_dir = Path(out_dir or cfg.output_dir)
    results = sweep(cfg, series_list)
    rows = summarize_fig2(results, cfg.window_grid)
    with staged_output(out_dir) as tmp:
        with open(tmp / "fig2_var.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["window", "mean_var", "std_var", "realizations"])
            for t, mean, std, n in rows:
                w.writerow([t, repr(mean), repr(std), n])
        with open(tmp / "fig2_realizations.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["realization", "window", "total_var", "n_edges"])
            for res in results:
                w.writerow([res.realization, res.window, repr(res.total_var), len(res.edges)])
    return rows
