"""Synthetic loss series with imposed correlation functions.

Values are drawn i.i.d. per process, then reordered by random within-row
swaps. A swap is kept only if it strictly lowers the squared distance between
the empirical and imposed correlation functions; the run stops once no swap
has been kept for ``plateau_window`` consecutive proposals.

With ``basin_factor > 1`` each row holds ``basin_factor * length`` draws. Only
the first ``length`` columns are scored and returned, while swaps range over
the whole row so that reservoir values can rotate into the scored window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from bnoprisk import _kernels
from bnoprisk.corrstats import CorrelationTarget, LossMatrix

CHUNK = 1 << 16


class ConfigError(ValueError):
    pass


@dataclass
class GeneratorConfig:
    n_processes: int
    length: int
    target: CorrelationTarget
    means: Sequence[float]
    marginal: str = "exponential"
    basin_factor: float = 2.0
    plateau_window: int = 10_000
    max_iterations: int = 10_000_000
    seed: int = 0
    trace_every: int = 1000
    process_labels: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.n_processes < 1 or self.length < 3:
            raise ConfigError("need n_processes >= 1 and length >= 3")
        if self.marginal != "exponential":
            raise ConfigError(f"unsupported marginal family {self.marginal!r}")
        self.means = [float(m) for m in self.means]
        if len(self.means) != self.n_processes:
            raise ConfigError("one mean per process required")
        if any(not m > 0 or not math.isfinite(m) for m in self.means):
            raise ConfigError("exponential means must be positive")
        if self.basin_factor < 1:
            raise ConfigError("basin_factor must be >= 1")
        if self.plateau_window < 1 or self.max_iterations < 1 or self.trace_every < 1:
            raise ConfigError("plateau_window, max_iterations and trace_every must be positive")
        if self.target.tau.shape[0] != self.n_processes:
            raise ConfigError("target size does not match n_processes")
        if not self.process_labels:
            self.process_labels = [f"p{i + 1}" for i in range(self.n_processes)]

    @property
    def basin_length(self) -> int:
        return int(round(self.basin_factor * self.length))

    @property
    def max_lag(self) -> int:
        return self.target.resolve_max_lag(self.length)


@dataclass
class GeneratorReport:
    final_objective: float
    initial_objective: float
    trace_iterations: np.ndarray
    objective_trace: np.ndarray
    accepted_swaps: int
    proposals: int
    halted_by: str


def draw_initial(config: GeneratorConfig, rng: np.random.Generator | None = None) -> LossMatrix:
    """``basin_factor * length`` inverse-CDF exponential draws per process."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    u = rng.random((config.n_processes, config.basin_length))
    means = np.asarray(config.means)[:, None]
    values = -means * np.log1p(-u)
    return LossMatrix(values, list(config.process_labels))


def _draw_proposals(rng: np.random.Generator, n_rows: int, n_cols: int, size: int):
    rows = rng.integers(0, n_rows, size=size)
    a = rng.integers(0, n_cols, size=size)
    b = rng.integers(0, n_cols - 1, size=size)
    b = b + (b >= a)
    return rows.astype(np.int64), a.astype(np.int64), b.astype(np.int64)


def propose_swap(series: LossMatrix | np.ndarray, rng: np.random.Generator) -> tuple[int, tuple[int, int]]:
    """Uniform row and an unordered pair of distinct uniform positions in it."""
    x = series.values if isinstance(series, LossMatrix) else np.asarray(series)
    n, m = x.shape
    if m < 2:
        raise ValueError("need at least two columns to swap")
    rows, a, b = _draw_proposals(rng, n, m, 1)
    return int(rows[0]), (int(a[0]), int(b[0]))


class _DescentState:
    """Running sums that make a swap cost O(N * max_lag) to score."""

    def __init__(self, x: np.ndarray, length: int, target: np.ndarray, max_lag: int):
        self.x = x
        self.length = length
        self.max_lag = max_lag
        self.target = target
        self.resync()

    def resync(self) -> None:
        self.prod = _kernels.lagged_products(self.x, self.length, self.max_lag)
        self.rowsum = self.x[:, : self.length].sum(axis=1)
        self.pair_obj = _kernels.all_pair_objectives(
            self.prod, self.rowsum, self.target, self.length, self.max_lag
        )

    @property
    def objective(self) -> float:
        return float(self.pair_obj.sum())


def run(config: GeneratorConfig) -> tuple[LossMatrix, GeneratorReport]:
    rng = np.random.default_rng(config.seed)
    x = draw_initial(config, rng).values.copy()
    n, m = x.shape
    max_lag = config.max_lag
    if max_lag > config.length - 2:
        raise ConfigError(f"max_lag {max_lag} exceeds length - 2")
    state = _DescentState(x, config.length, config.target.values(max_lag), max_lag)
    initial = state.objective
    if not math.isfinite(initial):
        raise ValueError("initial objective is not finite (zero same-time covariance)")

    cap = config.max_iterations // config.trace_every + 2
    trace_iter = np.zeros(cap, dtype=np.int64)
    trace_val = np.zeros(cap)
    trace_iter[0], trace_val[0] = 0, initial
    trace_len = 1
    proposals = accepted = stall = 0
    halted_by = "max_iterations"
    while proposals < config.max_iterations:
        size = min(CHUNK, config.max_iterations - proposals)
        rows, a, b = _draw_proposals(rng, n, m, size)
        done, acc, stall, trace_len = _kernels.descent_chunk(
            state.x, state.prod, state.rowsum, state.pair_obj, state.target,
            config.length, max_lag, rows, a, b, stall, config.plateau_window,
            config.trace_every, proposals, trace_iter, trace_val, trace_len,
        )
        proposals += int(done)
        accepted += int(acc)
        if stall >= config.plateau_window:
            halted_by = "plateau"
            break
    incremental = state.objective
    state.resync()
    final = state.objective
    if trace_iter[trace_len - 1] != proposals:
        trace_iter[trace_len] = proposals
        trace_val[trace_len] = incremental
        trace_len += 1
    report = GeneratorReport(
        final_objective=final,
        initial_objective=initial,
        trace_iterations=trace_iter[:trace_len].copy(),
        objective_trace=trace_val[:trace_len].copy(),
        accepted_swaps=accepted,
        proposals=proposals,
        halted_by=halted_by,
    )
    out = LossMatrix(state.x[:, : config.length].copy(), list(config.process_labels))
    return out, report
