"""Lagged cross/auto-correlation estimates and the swap-descent objective."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from bnoprisk import _kernels


class DegenerateSeriesError(ValueError):
    """A process row has zero variance, so its correlation is undefined."""


@dataclass
class LossMatrix:
    """N processes x S time steps of non-negative losses.

    Column index is the temporal order; ``process_labels`` name the rows.
    """

    values: np.ndarray
    process_labels: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim == 1:
            self.values = self.values[None, :]
        if self.values.ndim != 2:
            raise ValueError("loss matrix must be two-dimensional")
        n, s = self.values.shape
        if n < 1 or s < 2:
            raise ValueError(f"need at least 1 process and 2 time steps, got {n}x{s}")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("losses must be finite and non-negative")
        if not self.process_labels:
            self.process_labels = [f"p{i + 1}" for i in range(n)]
        self.process_labels = [str(lbl) for lbl in self.process_labels]
        if len(self.process_labels) != n:
            raise ValueError("one label per process required")

    @property
    def n_processes(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]


@dataclass
class CorrelationTarget:
    """Imposed correlations ``C_ij(t) = exp(-t / tau_ij)``."""

    tau: np.ndarray
    max_lag: int | None = None

    def __post_init__(self) -> None:
        self.tau = np.atleast_2d(np.asarray(self.tau, dtype=np.float64))
        if self.tau.shape[0] != self.tau.shape[1]:
            raise ValueError("tau must be square")
        if np.any(~np.isfinite(self.tau)) or np.any(self.tau <= 0):
            raise ValueError("decay times must be positive and finite")
        if not np.allclose(self.tau, self.tau.T, rtol=0, atol=0):
            raise ValueError("tau must be symmetric")
        if self.max_lag is not None and self.max_lag < 1:
            raise ValueError("max_lag must be a positive integer")

    @classmethod
    def homogeneous(cls, n: int, tau: float, max_lag: int | None = None) -> "CorrelationTarget":
        return cls(np.full((n, n), float(tau)), max_lag)

    def resolve_max_lag(self, length: int) -> int:
        """Explicit ``max_lag``, else ``min(S - 2, ceil(5 * max tau))``."""
        if self.max_lag is not None:
            return int(self.max_lag)
        return max(1, min(length - 2, math.ceil(5.0 * float(self.tau.max()))))

    def values(self, max_lag: int) -> np.ndarray:
        """``C[i, j, t]`` for t = 0..max_lag."""
        t = np.arange(max_lag + 1, dtype=np.float64)
        return np.exp(-t[None, None, :] / self.tau[:, :, None])

    def rescaled(self, window: int) -> "CorrelationTarget":
        """Target expected after summing over ``window`` steps (tau -> tau / T)."""
        return CorrelationTarget(self.tau / window)


@dataclass
class CorrelationEstimate:
    """``c[i, j, t]`` for t = 0..max_lag; ``undefined[i, j]`` marks zero covariance."""

    c: np.ndarray
    undefined: np.ndarray

    @property
    def max_lag(self) -> int:
        return self.c.shape[2] - 1


def _as_matrix(series) -> np.ndarray:
    if isinstance(series, LossMatrix):
        return series.values
    return LossMatrix(series).values


def empirical_correlation(series, max_lag: int) -> CorrelationEstimate:
    """Lagged correlations normalized by the same-time cross-covariance.

    ``c_ij(t) = [mean_{s<=S-t} l_i(s) l_j(s+t) - <l_i><l_j>] / cov(l_i, l_j)``
    where the means ``<l_i>`` run over the full series, so ``c_ij(0) = 1``.
    Pairs whose covariance vanishes get NaN and are flagged in ``undefined``.
    """
    x = _as_matrix(series)
    labels = series.process_labels if isinstance(series, LossMatrix) else None
    n, s = x.shape
    if max_lag < 1 or max_lag > s - 2:
        raise ValueError(f"max_lag must lie in 1..{s - 2}, got {max_lag}")
    std = x.std(axis=1)
    for i in range(n):
        if std[i] == 0.0 or std[i] <= 1e-14 * max(abs(x[i, 0]), 1.0):
            name = labels[i] if labels else f"process {i}"
            raise DegenerateSeriesError(f"constant loss series for {name}")
    prod = _kernels.lagged_products_numpy(x, s, max_lag)
    mean = x.mean(axis=1)
    mm = np.outer(mean, mean)
    t = np.arange(max_lag + 1)
    num = prod / (s - t) - mm[:, :, None]
    cov = num[:, :, 0]
    undefined = np.abs(cov) <= 1e-12 * np.outer(std, std)
    safe = np.where(undefined, 1.0, cov)
    c = num / safe[:, :, None]
    c[:, :, 0] = 1.0
    c[undefined] = np.nan
    return CorrelationEstimate(c=c, undefined=undefined)


def objective(series, target, max_lag: int | None = None) -> float:
    """Sum over all ordered pairs and lags 1..max_lag of ``(c_ij(t) - C_ij(t))**2``.

    ``target`` is a :class:`CorrelationTarget` or an explicit array
    ``C[i, j, t]`` covering at least lags 0..max_lag.
    """
    x = _as_matrix(series)
    if isinstance(target, CorrelationTarget):
        if max_lag is None:
            max_lag = target.resolve_max_lag(x.shape[1])
        tv = target.values(max_lag)
    else:
        tv = np.asarray(target, dtype=np.float64)
        if max_lag is None:
            max_lag = tv.shape[2] - 1
    if tv.shape[0] != x.shape[0] or tv.shape[2] < max_lag + 1:
        raise ValueError("target does not match the series or the lag range")
    est = empirical_correlation(series, max_lag)
    if est.undefined.any():
        i, j = np.argwhere(est.undefined)[0]
        raise DegenerateSeriesError(f"zero same-time covariance between processes {i} and {j}")
    d = est.c[:, :, 1:] - tv[:, :, 1 : max_lag + 1]
    return float(np.sum(d * d))


def fit_decay_time(c_slice: Sequence[float], floor: float = 0.05) -> float:
    """Decay time from a least-squares line through ``ln c(t)`` versus ``t``.

    Uses the leading run of lags (from t = 0) with ``c(t) > floor``; noise in
    the extinguished tail that happens to poke above the floor is ignored.
    """
    c = np.asarray(c_slice, dtype=np.float64)
    above = c > floor
    stop = int(np.argmin(above)) if not above.all() else c.size
    if stop < 3:
        raise ValueError("insufficient decay range")
    t = np.arange(stop, dtype=np.float64)
    slope = np.polyfit(t, np.log(c[:stop]), 1)[0]
    if slope >= 0:
        raise ValueError("insufficient decay range")
    return float(-1.0 / slope)
