"""plaplab: a numerical laboratory for p-Laplace exterior problems on
rotationally symmetric manifolds.

Classify profiles by p-hyperbolicity, p-stochastic completeness and the
p-Feller property; solve the radial exterior problems by exhaustion with an
independent energy-minimization cross-check; post-process solutions into
decay, support and integrability reports.
"""

from .analysis import (ComparisonResult, DecayReport, GridMismatch, NormResult,
                       SupportReport, compare_ordering, decay_limit,
                       detect_compact_support, gradient_lp_check, lq_norm,
                       lambda_power_comparison, weighted_sobolev_norm)
from .classify import (ClassificationReport, ConvergenceVerdict, FellerVerdict,
                       VerdictPolicy, classify_manifold,
                       improper_integral_verdict, is_p_feller,
                       is_p_hyperbolic, is_p_stochastically_complete,
                       volume_ball)
from .expr import EvalError, ParseError
from .solver import (ExteriorProblem, Grid, InvalidBoundary, LambdaSpec,
                     NonConvergence, RadialSolution, SolverError,
                     discrete_energy, minimal_exterior_solution,
                     minimize_energy, solve_annulus_bvp, weak_residual)
from .warping import (ExponentialGrowth, LogDerivativeBound, ModelManifold,
                      PowerGrowth, ValidationError, WarpingFunction,
                      cusp_cubic, euclidean, flare_cubic, hyperbolic,
                      log_sigma_pow, make_family, parse_sigma,
                      sigma_log_derivative_inf)

__version__ = "0.1.0"

__all__ = [
    "ParseError", "EvalError", "ValidationError",
    "WarpingFunction", "ModelManifold", "ExponentialGrowth", "PowerGrowth",
    "parse_sigma", "make_family", "euclidean", "hyperbolic", "cusp_cubic",
    "flare_cubic", "log_sigma_pow", "sigma_log_derivative_inf",
    "LogDerivativeBound",
    "VerdictPolicy", "ConvergenceVerdict", "FellerVerdict",
    "ClassificationReport", "improper_integral_verdict", "is_p_hyperbolic",
    "is_p_stochastically_complete", "is_p_feller", "classify_manifold",
    "volume_ball",
    "LambdaSpec", "ExteriorProblem", "Grid", "RadialSolution",
    "SolverError", "NonConvergence", "InvalidBoundary",
    "solve_annulus_bvp", "minimize_energy", "minimal_exterior_solution",
    "weak_residual", "discrete_energy",
    "DecayReport", "SupportReport", "NormResult", "ComparisonResult",
    "GridMismatch", "decay_limit", "detect_compact_support", "lq_norm",
    "weighted_sobolev_norm", "gradient_lp_check", "compare_ordering",
    "lambda_power_comparison",
    "__version__",
]
