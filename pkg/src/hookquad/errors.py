"""Exception types shared across the package.

Every error raised by the library (as opposed to plain ``ValueError`` for
malformed arguments) derives from :class:`HookquadError` so callers can catch
domain failures in one place.  The CLI maps the operational failures to
dedicated process exit codes.
"""


class HookquadError(Exception):
    """Base class for all library-specific errors."""


class SingularOrientation(HookquadError):
    """Pitch angle too close to +/- pi/2 for the Euler-rate map to be valid."""


class NotEquilibrium(HookquadError):
    """Linearization requested at a point that is not an equilibrium."""


class DegenerateThrust(HookquadError):
    """Desired thrust vector has zero norm; attitude is undefined."""


class OrderTooHigh(HookquadError):
    """Requested a spline derivative beyond the polynomial degree."""


class Infeasible(HookquadError):
    """Constraint set of an optimization problem is empty."""


class RankDeficient(HookquadError):
    """Constraint matrix is structurally rank deficient."""


class SolverStalled(HookquadError):
    """Iterative solver hit its iteration cap before reaching tolerance."""


class OutOfDomain(HookquadError):
    """Query outside the domain of a time or path parameterization."""


class RiccatiNoConvergence(HookquadError):
    """Continuous algebraic Riccati equation could not be solved."""


class NotStabilizable(HookquadError):
    """Linearized pair (A, B) admits no stabilizing feedback."""


class GraspFailed(HookquadError):
    """Hook tip missed the payload at the grasp event."""

    def __init__(self, message, distance=None, time=None):
        super().__init__(message)
        self.distance = distance
        self.time = time


class Diverged(HookquadError):
    """Closed-loop state blew up during simulation."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class NumericalBlowup(HookquadError):
    """Integrator state norm exceeded the blow-up guard."""


class NoFeasiblePoint(HookquadError):
    """Hyperparameter search found no feasible candidate."""
