"""Non-overlapping window sums of a loss matrix (the extracted database)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from bnoprisk.corrstats import LossMatrix


@dataclass
class ExtractedDatabase:
    """``records[k, i]``: loss of process ``i`` summed over window ``k``.

    Records are stored R x N (one row per window), the transpose of
    :class:`LossMatrix`.
    """

    window: int
    records: np.ndarray
    process_labels: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.records = np.atleast_2d(np.asarray(self.records, dtype=np.float64))
        if self.window < 1:
            raise ValueError("window must be a positive integer")
        if np.any(self.records < 0):
            raise ValueError("aggregate losses must be non-negative")
        if not self.process_labels:
            self.process_labels = [f"p{i + 1}" for i in range(self.records.shape[1])]
        if len(self.process_labels) != self.records.shape[1]:
            raise ValueError("one label per process required")

    @property
    def n_records(self) -> int:
        return self.records.shape[0]

    @property
    def n_processes(self) -> int:
        return self.records.shape[1]

    def as_loss_matrix(self) -> LossMatrix:
        return LossMatrix(self.records.T.copy(), list(self.process_labels))


def extract(series: LossMatrix, window: int) -> ExtractedDatabase:
    """Sum each process over consecutive windows of ``window`` steps.

    A trailing partial window is dropped so every record covers exactly
    ``window`` steps.
    """
    window = int(window)
    if window < 1:
        raise ValueError("window must be a positive integer")
    n, s = series.values.shape
    if window > s:
        raise ValueError(f"window exceeds series length ({window} > {s})")
    r = s // window
    records = series.values[:, : r * window].reshape(n, r, window).sum(axis=2).T
    return ExtractedDatabase(window, records, list(series.process_labels))
