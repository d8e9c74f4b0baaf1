"""Refinement chains for the normalized Jensen functional, with exact
rational bookkeeping and independent verification."""

from .bounds_baseline import (
    RatioExtremes,
    TtdTerms,
    check_dragomir,
    ratio_extremes,
    three_weight_bounds,
    ttd_bounds,
)
from .chain_refine import (
    AUTO_UNIFORM,
    ChainResult,
    ChainState,
    closed_form_Mk,
    lower_chain,
    lower_start,
    lower_step,
    upper_chain,
    upper_start,
    upper_step,
)
from .chain_reduce import reduce_lower_chain, reduce_lower_step, reduce_upper_chain, reduce_upper_step
from .convex_catalog import KINDS, ConvexFn, check_convexity, evaluate
from .errors import (
    ConfigError,
    DomainError,
    InvariantViolation,
    JensenError,
    LengthMismatch,
    ShapeMismatch,
    StallWarning,
    ZeroDenominator,
)
from .jensen_core import WeightVector, barycenter, jensen
from .verify_oracle import (
    FuzzConfig,
    VerifyReport,
    conservation_check,
    final_jensen_check,
    fuzz,
    telescoping_check,
    verify_result,
)

__version__ = "0.1.0"
