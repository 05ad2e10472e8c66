"""Forward-rate fields driven by Levy noise: regimes, simulation and explosion."""

from __future__ import annotations

__version__ = "0.1.0"

from .comparison import (
    ComparisonBundle,
    DominanceReport,
    blowup_h,
    closed_double_integral,
    comparison_bundle,
    comparison_dominates,
    g_exact,
    power_mean_check,
    r_function,
)
from .errors import (
    ConfigError,
    DegenerateDenominator,
    EpsRequired,
    HJMLevyError,
    IntegrabilityViolation,
    JumpBelowFloor,
    MaxIterExceeded,
    MeasureError,
    MonotonicityViolation,
    NumericOverflow,
    RegimeMismatch,
    RhoBoundaryError,
    SupportViolation,
)
from .exponent import ExponentEvaluator, JPrimeTable, Strategy
from .measures import LevyMeasureSpec, MeasureKind, ValidatedMeasure, VolatilitySpec, validate
from .regime import PowerCertificate, RegimeReport, Verdict, bound_constant, classify, fit_lower_power
from .simulate import CoefficientField, JumpPath, a_field, path_seed, simulate_path
from .solver import (
    ForwardField,
    GridSpec,
    SolveResult,
    apply_A,
    bond_price,
    march,
    solve_fixed_point,
)
