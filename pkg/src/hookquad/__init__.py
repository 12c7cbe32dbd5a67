"""Time-optimal aerial grasp-and-transport: planning, control, certification.

The package models a quadrotor carrying a passive one-degree-of-freedom hook
manipulator, plans five-segment grasp-transport-release missions as B-spline
paths with convex time allocation, tracks them with a dual-mode controller
(robust geometric tracking plus a payload-regulating LQR), and certifies the
controller hand-off with sampled region-of-attraction checks.

Module map
----------
``model``     rigid-body + pendulum dynamics, kinematic maps, linearization
``bspline``   clamped B-spline curves and the spatial cost Gram matrices
``qp``        dense active-set quadratic program solver
``socp``      interior-point second-order cone solver and time profiles
``planner``   mission frames, five-segment planning, yaw polynomials
``control``   geometric and LQR control laws, CARE solver, scheduling
``sim``       closed-loop mission simulation with attach/release events
``verify``    disturbance bounds and scenario-approach ROA certificates
``hyperopt``  grid / particle-swarm tuning of planner hyperparameters
``cli``       command-line front end writing CSV/JSON artifacts
"""

from .control import GeomGains, LqrGain, geometric_control, lqr_design, solve_care
from .errors import (
    Diverged,
    GraspFailed,
    HookquadError,
    Infeasible,
    NoFeasiblePoint,
    NumericalBlowup,
)
from .model import ControlInput, FullState, QuadState, SystemParams
from .planner import HyperParams, MissionPlan, MissionSpec, plan_mission
from .sim import SimConfig, SimTrace, metrics, run_mission
from .verify import (
    Certificate,
    OperatingRegion,
    certify_roa,
    disturbance_bounds,
    scenario_sample_count,
)

__version__ = "0.1.0"

__all__ = [
    "SystemParams",
    "FullState",
    "QuadState",
    "ControlInput",
    "HyperParams",
    "MissionSpec",
    "MissionPlan",
    "plan_mission",
    "GeomGains",
    "LqrGain",
    "geometric_control",
    "lqr_design",
    "solve_care",
    "SimConfig",
    "SimTrace",
    "run_mission",
    "metrics",
    "OperatingRegion",
    "Certificate",
    "certify_roa",
    "disturbance_bounds",
    "scenario_sample_count",
    "HookquadError",
    "Infeasible",
    "GraspFailed",
    "Diverged",
    "NumericalBlowup",
    "NoFeasiblePoint",
    "__version__",
]
