"""PANOC with smooth obstacle penalties for single-shooting nonlinear MPC."""

from . import obstacles
from .lbfgs import LbfgsBuffer, lbfgs_direction
from .obstacles import Obstacle, SmoothInequality
from .panoc import (
    BoxProjector,
    FunctionObjective,
    SolveReport,
    SolverConfig,
    backtrack_gamma,
    fbe,
    lipschitz_estimate,
    projected_gradient,
    residual,
    solve,
)
from .problem import (
    ControlProblem,
    DynamicsModel,
    InputBox,
    QuadraticStageCost,
    StateInequalityPenalty,
    make_integrator_model,
    make_trailer_model,
    validate,
)
from .shooting import (
    DivergedRolloutError,
    RolloutWorkspace,
    ShootingObjective,
    cost,
    cost_and_gradient,
    cost_terms,
    discretize_euler,
    discretize_rk4,
    rollout,
)

__version__ = "0.1.0"
