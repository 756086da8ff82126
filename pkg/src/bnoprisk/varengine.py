"""Loss distributions on a fixed monetary grid, self-convolution to a
horizon, and the sampled 99.9-percentile VaR."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass
class BinnedPdf:
    """Probability mass over bins 1..len(mass) of width ``bin_width``.

    ``order`` counts how many base distributions (each with ``base_bins``
    bins) were convolved to make this one. Base bin ``j`` stands for its
    midpoint ``(j - 1/2) * bin_width``; after ``m`` convolutions bin ``k``
    stands for the sum of midpoints, ``(k + m/2 - 1) * bin_width``.
    """

    mass: np.ndarray
    bin_width: float
    order: int = 1
    base_bins: int | None = None

    def __post_init__(self) -> None:
        self.mass = np.asarray(self.mass, dtype=np.float64)
        if self.mass.ndim != 1 or self.mass.size == 0:
            raise ValueError("mass must be a non-empty vector")
        if np.any(self.mass < 0) or abs(self.mass.sum() - 1.0) > 1e-9:
            raise ValueError("mass must be non-negative and sum to 1")
        if not self.bin_width > 0:
            raise ValueError("bin_width must be positive")
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if self.base_bins is None:
            if self.order != 1:
                raise ValueError("base_bins required for a convolved pdf")
            self.base_bins = self.mass.size
        if self.mass.size != self.order * (self.base_bins - 1) + 1:
            raise ValueError(
                f"length {self.mass.size} inconsistent with order {self.order} "
                f"and {self.base_bins} base bins"
            )

    def __len__(self) -> int:
        return self.mass.size

    @property
    def values(self) -> np.ndarray:
        k = np.arange(1, self.mass.size + 1, dtype=np.float64)
        return (k + self.order / 2.0 - 1.0) * self.bin_width

    def value_of(self, index: int | np.ndarray) -> float | np.ndarray:
        """Money value of 1-based bin ``index``."""
        return (np.asarray(index, dtype=np.float64) + self.order / 2.0 - 1.0) * self.bin_width

    def mean(self) -> float:
        return float(self.mass @ self.values)

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.mass)

    def quantile_index(self, level: float = 0.999) -> int:
        """Smallest 1-based index whose CDF reaches ``level``."""
        cdf = self.cdf()
        return int(np.searchsorted(cdf, level - 1e-12, side="left")) + 1


@dataclass
class VarReport:
    per_process_var: np.ndarray
    per_process_std: np.ndarray
    horizon: int
    window: int
    repetitions: int
    process_labels: list[str] = field(default_factory=list)

    @property
    def total_var(self) -> float:
        return float(np.sum(self.per_process_var))


def convolve(p: BinnedPdf, q: BinnedPdf) -> BinnedPdf:
    """Distribution of the sum of independent draws from ``p`` and ``q``.

    ``R(k) = sum_m p(m) q(k - m + 1)`` over the valid range, with 1-based
    indices, for k = 1 .. len(p) + len(q) - 1.
    """
    if not np.isclose(p.bin_width, q.bin_width, rtol=1e-12, atol=0.0):
        raise ValueError(f"bin widths differ: {p.bin_width} vs {q.bin_width}")
    if p.base_bins != q.base_bins:
        raise ValueError("pdfs built from different base bin counts")
    return BinnedPdf(
        np.convolve(p.mass, q.mass),
        p.bin_width,
        order=p.order + q.order,
        base_bins=p.base_bins,
    )


def n_convolutions(window: int, horizon: int) -> int:
    """Number of window-level factors covering ``horizon``: round-half-up of H/T, at least 1."""
    if horizon < window:
        raise ValueError("horizon below aggregation window")
    return max(1, int(np.floor(horizon / window + 0.5)))


def convolve_to_horizon(p: BinnedPdf, window: int, horizon: int) -> BinnedPdf:
    if p.order != 1:
        raise ValueError("expected an unconvolved (order 1) pdf")
    m = n_convolutions(window, horizon)
    out = p
    for _ in range(m - 1):
        out = convolve(out, p)
    return out


def sample_second_largest(p: BinnedPdf, repetitions: int, samples_per_rep: int,
                          rng: np.random.Generator) -> np.ndarray:
    """Per repetition, the second largest of ``samples_per_rep`` draws (money)."""
    cdf = p.cdf()
    cdf[-1] = 1.0
    u = rng.random((repetitions, samples_per_rep))
    idx = np.searchsorted(cdf, u, side="right") + 1
    idx = np.minimum(idx, p.mass.size)
    second = np.partition(idx, samples_per_rep - 2, axis=1)[:, samples_per_rep - 2]
    return p.value_of(second)


def percentile_999(p: BinnedPdf, repetitions: int = 100, samples_per_rep: int = 1000,
                   rng: np.random.Generator | None = None) -> tuple[float, float]:
    """Mean and standard deviation of the sampled 99.9 percentile.

    Each repetition draws ``samples_per_rep`` values and keeps the second
    largest; with 1000 samples that is the 99.9 percentile of the sample.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if samples_per_rep < 2:
        raise ValueError("need at least two samples per repetition")
    if rng is None:
        rng = np.random.default_rng()
    est = sample_second_largest(p, repetitions, samples_per_rep, rng)
    std = float(est.std(ddof=1)) if repetitions > 1 else 0.0
    return float(est.mean()), std


def var_report(marginals: Sequence[BinnedPdf], window: int, horizon: int,
               repetitions: int = 100, rng: np.random.Generator | None = None,
               samples_per_rep: int = 1000,
               process_labels: Sequence[str] | None = None) -> VarReport:
    """Per-process VaR at ``horizon``; the total is their sum."""
    if rng is None:
        rng = np.random.default_rng()
    if any(m.order != 1 for m in marginals):
        raise ValueError("marginals must be unconvolved (order 1)")
    streams = rng.spawn(len(marginals))
    vals, stds = [], []
    for pdf, stream in zip(marginals, streams):
        conv = convolve_to_horizon(pdf, window, horizon)
        v, s = percentile_999(conv, repetitions, samples_per_rep, stream)
        vals.append(v)
        stds.append(s)
    labels = list(process_labels) if process_labels else [f"p{i + 1}" for i in range(len(marginals))]
    return VarReport(np.array(vals), np.array(stds), int(horizon), int(window), int(repetitions), labels)
