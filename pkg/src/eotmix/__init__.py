"""Gaussian mixture likelihoods as semi-relaxed entropic optimal transport."""

from .bcd import FitReport, FitSettings, Termination, bcd_sweep, fit
from .core import (
    CostMatrix,
    Coupling,
    Dataset,
    GmmParams,
    ProbabilityVector,
    validate_simplex,
)
from .divergences import (
    gibbs_objective,
    gibbs_optimum,
    kl_matrix,
    kl_three_term_decomposition,
    kl_vector,
    weighted_logsumexp,
)
from .eot import (
    EotSolution,
    SinkhornSettings,
    eot_objective,
    min_over_pi_semi_relaxed,
    semi_relaxed_solve,
    sinkhorn,
)
from .errors import EotMixError
from .mixture import cost_matrix, gmm_log_pdf, nll, sample_gmm

__version__ = "0.1.0"

__all__ = [
    "CostMatrix",
    "Coupling",
    "Dataset",
    "EotMixError",
    "EotSolution",
    "FitReport",
    "FitSettings",
    "GmmParams",
    "ProbabilityVector",
    "SinkhornSettings",
    "Termination",
    "bcd_sweep",
    "cost_matrix",
    "eot_objective",
    "fit",
    "gibbs_objective",
    "gibbs_optimum",
    "gmm_log_pdf",
    "kl_matrix",
    "kl_three_term_decomposition",
    "kl_vector",
    "min_over_pi_semi_relaxed",
    "nll",
    "sample_gmm",
    "semi_relaxed_solve",
    "sinkhorn",
    "validate_simplex",
    "weighted_logsumexp",
]
