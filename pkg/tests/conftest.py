import hashlib
import os
from pathlib import Path

import numpy as np
import pytest

from bnoprisk import io
from bnoprisk.harness import ExperimentConfig, generate_realization

CACHE_ENV = "BNOPRISK_TEST_CACHE"


def _signature(cfg: ExperimentConfig) -> str:
    g = cfg.generator(0)
    key = repr((g.n_processes, g.length, cfg.tau, cfg.max_lag, tuple(g.means), g.basin_factor,
                g.plateau_window, g.max_iterations, cfg.master_seed))
    return hashlib.sha1(key.encode()).hexdigest()[:12]


def realization_series(cfg: ExperimentConfig, r: int):
    """Generated series for realization ``r``; reused from $BNOPRISK_TEST_CACHE when set."""
    cache = os.environ.get(CACHE_ENV)
    if not cache:
        return generate_realization(cfg, r)[0]
    path = Path(cache) / f"{_signature(cfg)}_r{r:03d}.csv"
    if path.exists():
        return io.read_series(path)
    series = generate_realization(cfg, r)[0]
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    io.write_series(series, tmp)
    os.replace(tmp, path)
    return series


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
