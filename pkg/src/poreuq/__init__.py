"""Uncertainty quantification and sensitivity analysis for hierarchical nanoporous media."""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .bayesnet import (MODELS, NARROW, PARAMS, PHYSICAL, HyperRanges, PriorModel, SampleBatch,
                       empirical_correlation, marginal_density, rosenblatt_forward,
                       rosenblatt_inverse, sample_parameters)
from .closure import (ClosureField, DiffusivityField, EffectiveProps, effective_tensor,
                      forward_model, solve_closure)
from .config import RunConfig, load_config
from .density import DensityGrid, isj_bandwidth, kde_1d, kde_2d
from .errors import *  # noqa: F401,F403
from .geometry import PoreMask, PoreParams, pore_measures, rasterize_pore
from .gsa import MiEstimate, RankingTable, mi_index, mutual_information, rank_effects
from .pipeline import ResultsStore, cache_key, run_pipeline
from .stats import CramerResult, cramer_statistic, cramer_test
from .surrogate import PcBasis, PcSurrogate, pce_eval, pce_fit, sobol_first_order

__all__ = [
    "BACKEND", "__version__",
    "MODELS", "PARAMS", "NARROW", "PHYSICAL", "HyperRanges", "PriorModel", "SampleBatch",
    "sample_parameters", "rosenblatt_inverse", "rosenblatt_forward", "empirical_correlation",
    "marginal_density",
    "PoreParams", "PoreMask", "rasterize_pore", "pore_measures",
    "DiffusivityField", "ClosureField", "EffectiveProps", "solve_closure", "effective_tensor",
    "forward_model",
    "PcBasis", "PcSurrogate", "pce_fit", "pce_eval", "sobol_first_order",
    "DensityGrid", "isj_bandwidth", "kde_1d", "kde_2d",
    "MiEstimate", "RankingTable", "mutual_information", "mi_index", "rank_effects",
    "CramerResult", "cramer_statistic", "cramer_test",
    "RunConfig", "load_config", "ResultsStore", "run_pipeline", "cache_key",
]
