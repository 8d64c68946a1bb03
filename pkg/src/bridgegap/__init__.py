"""High-precision distribution of the maximal gap between a Brownian bridge
and its least concave majorant.

The cdf is obtained by Gaver-Stehfest inversion of a Bessel-product
transform; Monte Carlo estimators give an independent check.
"""

__version__ = "0.1.0"

from .errors import BridgeGapError, ConvergenceError, DomainError, PrecisionError, SlowConvergenceError
from .precision import PrecisionContext, binomial, make_context
from .specfun import bessel_k01, bessel_term, f3_cdf
from .stehfest import GSWeights, gs_invert, gs_weights
from .distribution import CdfEvaluation, GEvaluation, QuantileResult, cdf, cdf_many, g_transform, n0_bound, quantile
from .montecarlo import j0_bound, mc_cdf, sample_m, sample_vn, simulate_bridge_majorant

__all__ = [
    "__version__",
    "BridgeGapError",
    "ConvergenceError",
    "DomainError",
    "PrecisionError",
    "SlowConvergenceError",
    "PrecisionContext",
    "make_context",
    "binomial",
    "bessel_k01",
    "bessel_term",
    "f3_cdf",
    "GSWeights",
    "gs_weights",
    "gs_invert",
    "GEvaluation",
    "CdfEvaluation",
    "QuantileResult",
    "g_transform",
    "n0_bound",
    "cdf",
    "cdf_many",
    "quantile",
    "j0_bound",
    "mc_cdf",
    "sample_vn",
    "sample_m",
    "simulate_bridge_majorant",
]
