"""Operational-risk modelling with discrete Bayesian networks.

Pipeline: synthesize correlated loss series, aggregate them over a window,
learn a network from the aggregated records, then convolve per-process loss
distributions and sample their 99.9 percentile.
"""

from bnoprisk._accel import NUMBA_ENABLED
from bnoprisk.aggregate import ExtractedDatabase, extract
from bnoprisk.bnlearn import (
    DagStructure,
    DiscreteBayesNet,
    Discretization,
    discretize,
    joint,
    learn_cpts,
    learn_structure,
    marginal,
    score,
)
from bnoprisk.corrstats import (
    CorrelationEstimate,
    CorrelationTarget,
    LossMatrix,
    empirical_correlation,
    fit_decay_time,
    objective,
)
from bnoprisk.synthgen import GeneratorConfig, GeneratorReport, draw_initial, propose_swap, run
from bnoprisk.varengine import (
    BinnedPdf,
    VarReport,
    convolve,
    convolve_to_horizon,
    percentile_999,
    var_report,
)

__version__ = "0.1.0"

__all__ = [
    "NUMBA_ENABLED",
    "BinnedPdf",
    "CorrelationEstimate",
    "CorrelationTarget",
    "DagStructure",
    "DiscreteBayesNet",
    "Discretization",
    "ExtractedDatabase",
    "GeneratorConfig",
    "GeneratorReport",
    "LossMatrix",
    "VarReport",
    "convolve",
    "convolve_to_horizon",
    "discretize",
    "draw_initial",
    "empirical_correlation",
    "extract",
    "fit_decay_time",
    "joint",
    "learn_cpts",
    "learn_structure",
    "marginal",
    "objective",
    "percentile_999",
    "propose_swap",
    "run",
    "score",
    "var_report",
]
