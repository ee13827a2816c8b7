"""Optimal semicouplings on gridded box domains.

Solve Kantorovich's dual max program for an abundant source against a
finite target, stratify the singular set of the dual potential by
cross-difference rank, check Uniform Halfspace conditions, and integrate
the averaged-gradient blow-up flows that retract the source onto the
active domain and the strata onto one another.
"""

__version__ = "0.1.0"

from .costs import (LogRepulsiveCost, QuadraticCost, UserCost,
                    audit_assumptions, cost_eval, cost_grad_x, cost_hess_x,
                    make_cost)
from .dual import (DualSolution, DualSolver, Potential, c_transform,
                   cell_assignment, cell_masses, dual_functional, is_active,
                   primal_cost, solve_dual)
from .errors import (AbundanceError, ConvergenceError, InactivePointError,
                     OutOfDomainError, PoleError, SchemaError, StageError)
from .fields import FieldSpec, eta_cellular, eta_off_domain, f_avg, nu_weight
from .flows import (CellularField, OffDomainField, RetractionFlow, Trajectory,
                    integrate_flow, reparameterize, retract_region)
from .hull import hull_distance, min_norm_point
from .measures import SourceMeasure, TargetMeasure, make_source
from .problem import Problem, Tolerances
from .singularity import (StratumField, Stratifier, SubdifferentialSet,
                          TangentProjector, cross_diff_gradients,
                          dimension_audit, stratify, stratum_rank,
                          subdifferential, tangent_projector)
from .uhs import UHSReport, sample_region, uhs_check

__all__ = [
    "__version__",
    "AbundanceError", "ConvergenceError", "InactivePointError",
    "OutOfDomainError", "PoleError", "SchemaError", "StageError",
    "SourceMeasure", "TargetMeasure", "make_source",
    "QuadraticCost", "LogRepulsiveCost", "UserCost", "make_cost",
    "cost_eval", "cost_grad_x", "cost_hess_x", "audit_assumptions",
    "Problem", "Tolerances",
    "Potential", "DualSolution", "DualSolver", "c_transform", "is_active",
    "cell_assignment", "cell_masses", "dual_functional", "primal_cost",
    "solve_dual",
    "SubdifferentialSet", "StratumField", "TangentProjector", "Stratifier",
    "subdifferential", "cross_diff_gradients", "stratum_rank", "stratify",
    "tangent_projector", "dimension_audit",
    "FieldSpec", "f_avg", "eta_off_domain", "nu_weight", "eta_cellular",
    "OffDomainField", "CellularField", "Trajectory", "RetractionFlow",
    "integrate_flow", "reparameterize", "retract_region",
    "UHSReport", "uhs_check", "sample_region",
    "hull_distance", "min_norm_point",
]
