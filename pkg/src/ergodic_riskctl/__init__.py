"""Risk-sensitive ergodic singular control of a one-dimensional diffusion.

Solves for the optimal reflection interval and growth rate via a
Sturm-Liouville principal-eigenvalue formulation, verifies the HJB
equation branch by branch, and cross-checks by Monte Carlo simulation
of the reflected controlled diffusion.
"""

__version__ = "0.1.0"

from .boundary import (BoundarySolution, HjbReport, SweepTable, gamma_map,
                       reflection_solution, solve_boundaries, theta_sweep,
                       value_gradient, value_hessian, verify_hjb)
from .errors import AssumptionError, InvalidModelError, NumericsError
from .model import (ModelSpec, RiskParam, Side, TurningPoints, eval_H,
                    find_turning_points, scale_density)
from .sim import (PathBatchResult, PathConfig, optimality_probe,
                  reflected_cost_paths, risk_sensitive_rate)
from .sturm import (EigenSolution, lambda_partials, principal_eigenpair,
                    rayleigh_quotient)

__all__ = [
    "__version__",
    "ModelSpec", "RiskParam", "Side", "TurningPoints",
    "eval_H", "find_turning_points", "scale_density",
    "EigenSolution", "principal_eigenpair", "rayleigh_quotient",
    "lambda_partials",
    "BoundarySolution", "HjbReport", "SweepTable", "gamma_map",
    "solve_boundaries", "reflection_solution", "value_gradient",
    "value_hessian", "verify_hjb", "theta_sweep",
    "PathConfig", "PathBatchResult", "reflected_cost_paths",
    "risk_sensitive_rate", "optimality_probe",
    "InvalidModelError", "AssumptionError", "NumericsError",
]
