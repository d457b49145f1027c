"""Changepoint detection for multidimensional trajectories.

Fits continuous piecewise-linear signal models by penalized maximum
likelihood, searches the changepoint space with a four-kernel
Metropolis-Hastings sampler, and summarizes segmentation ensembles with
time-weighted speed statistics.  Includes synthetic-path generators, scripted
numerical studies and a command-line interface.
"""

from .model import (
    ChainTrace,
    ChangepointVector,
    McmcConfig,
    ScoreConfig,
    Segmentation,
    Trajectory,
    cp_vector_to_times,
    param_count,
    times_to_cp_vector,
)
from .fit import build_design, fit_given_changepoints, rss_of
from .criterion import ScoreBreakdown, penalty, score
from .proposals import (
    Proposal,
    ProposalType,
    propose_birth_death,
    propose_new,
    propose_segment_bd,
    propose_shift,
)
from .sampler import cplass, mh_step, run_chain, score_total
from .simulate import (
    BASE_TWO_STATE,
    PiecewiseTruth,
    TwoStateParams,
    simulate_piecewise,
    simulate_two_state,
    truth_from_changepoints,
)
from .stats import (
    CsaCurve,
    Ecdf,
    Ensemble,
    SegmentPool,
    bootstrap_ensemble,
    csa,
    max_speed_ecdf,
    weighted_kde,
)
from . import errors, experiments, io, seeds

__version__ = "0.1.0"

__all__ = [
    "Trajectory",
    "ChangepointVector",
    "Segmentation",
    "ScoreConfig",
    "McmcConfig",
    "ChainTrace",
    "cp_vector_to_times",
    "times_to_cp_vector",
    "param_count",
    "build_design",
    "fit_given_changepoints",
    "rss_of",
    "ScoreBreakdown",
    "penalty",
    "score",
    "Proposal",
    "ProposalType",
    "propose_new",
    "propose_birth_death",
    "propose_segment_bd",
    "propose_shift",
    "mh_step",
    "run_chain",
    "cplass",
    "score_total",
    "PiecewiseTruth",
    "TwoStateParams",
    "BASE_TWO_STATE",
    "simulate_piecewise",
    "simulate_two_state",
    "truth_from_changepoints",
    "SegmentPool",
    "CsaCurve",
    "Ecdf",
    "Ensemble",
    "csa",
    "max_speed_ecdf",
    "weighted_kde",
    "bootstrap_ensemble",
    "errors",
    "experiments",
    "io",
    "seeds",
    "__version__",
]
