"""Dual-mode flight control: robust geometric tracking and LQR regulation.

Three controller modes cover a mission:

* mode 2 — geometric tracking on SE(3) with bounded corrective (robust)
  terms, used while flying unloaded;
* mode 1 — the same law plus an additive thrust feedforward that carries the
  payload weight, used while the hook is loaded;
* mode 3 — a linear-quadratic regulator about the loaded hover equilibrium,
  used during the fixed hold window at the drop-off point to damp the payload
  swing before release.

The LQR gain comes from an in-house continuous algebraic Riccati solver
based on the matrix sign-function iteration.  Reference angular velocity and
acceleration for the attitude loop are generated by finite-differencing the
desired rotation along the plan at the controller period.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NotStabilizable, RiccatiNoConvergence
from .model import (
    E3,
    ControlInput,
    FullState,
    QuadState,
    SystemParams,
    attitude_from_force,
    euler_rate_map,
    hat,
    hover_input,
    linearize,
    rotation_zyx,
    vee,
)

__all__ = [
    "GeomGains",
    "LqrGain",
    "ControllerSchedule",
    "LQR_WEIGHTS_Q",
    "LQR_WEIGHTS_R",
    "MODE_GEOMETRIC_FF",
    "MODE_GEOMETRIC",
    "MODE_LQR",
    "robust_position_term",
    "robust_attitude_term",
    "geometric_control",
    "feedforward_thrust",
    "solve_care",
    "care_residual",
    "lqr_design",
    "lqr_control",
    "reference_rotation",
    "control_mode",
    "scheduled_control",
]

#: Controller mode labels used in schedules, traces, and logs.
MODE_GEOMETRIC_FF = 1
MODE_GEOMETRIC = 2
MODE_LQR = 3

#: Default LQR state weights for (x, y, z, phi, theta, psi, alpha, and rates).
LQR_WEIGHTS_Q = np.diag(
    [10.0, 10.0, 100.0, 0.1, 0.1, 0.1, 0.01, 1.0, 1.0, 10.0, 1.0, 1.0, 1.0, 0.05]
)
#: Default LQR input weights for (F, tau_x, tau_y, tau_z).
LQR_WEIGHTS_R = np.diag([5.0, 20.0, 20.0, 20.0])


@dataclass
class GeomGains:
    """Gains of the robust geometric tracking controller.

    ``k_r, k_v`` act on position/velocity errors, ``k_R, k_omega`` on
    attitude/rate errors.  ``delta_r`` and ``delta_R`` bound the corrective
    terms (in N and N m); ``c1, c2, eps_r, eps_R, kappa`` shape them.
    """

    k_r: float = 6.0
    k_v: float = 3.0
    k_R: float = 1.0
    k_omega: float = 0.2
    c1: float = 1.0
    c2: float = 1e-3
    eps_r: float = 1e-4
    eps_R: float = 1e-4
    kappa: float = 3.0
    delta_r: float = 0.28
    delta_R: float = 0.011

    def __post_init__(self):
        for name in (
            "k_r", "k_v", "k_R", "k_omega",
            "c1", "c2", "eps_r", "eps_R",
            "kappa", "delta_r", "delta_R",
        ):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.kappa <= 2.0:
            raise ValueError(f"kappa must exceed 2, got {self.kappa}")

    def to_dict(self) -> dict:
        return {k: float(getattr(self, k)) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, data: dict) -> "GeomGains":
        return cls(**{k: float(v) for k, v in data.items()})


@dataclass
class LqrGain:
    """State-feedback gain about the loaded hover equilibrium.

    ``u = u0 - K (x - x0)`` with the 14-state vector ordering of
    :class:`~hookquad.model.FullState`.  ``P`` is the Riccati cost matrix
    (kept for Lyapunov-decay checks).
    """

    K: np.ndarray
    x0: np.ndarray
    u0: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        self.K = np.asarray(self.K, dtype=float)
        self.x0 = np.asarray(self.x0, dtype=float)
        self.u0 = np.asarray(self.u0, dtype=float)
        self.P = np.asarray(self.P, dtype=float)
        if self.K.shape != (4, 14):
            raise ValueError("K must be 4x14")
        if self.x0.shape != (14,) or self.u0.shape != (4,):
            raise ValueError("x0 must be length 14 and u0 length 4")


@dataclass(frozen=True)
class ControllerSchedule:
    """Mode assignment along the mission timeline.

    Unloaded segments (1, 2, 5) fly under the plain geometric law, loaded
    segments (3, 4) add the payload feedforward, and the hold window at the
    drop-off point runs the LQR for ``lqr_duration`` seconds.  There are
    exactly two switches into/out of the LQR mode.
    """

    lqr_duration: float = 2.0

    def mode_at(self, t: float, plan) -> int:
        return control_mode(t, plan)


# ---------------------------------------------------------------------------
# robust geometric tracking
# ---------------------------------------------------------------------------

def robust_position_term(e_B: np.ndarray, gains: GeomGains) -> np.ndarray:
    """Bounded corrective force: norm at most ``delta_r`` for any error."""
    e_B = np.asarray(e_B, dtype=float)
    nB = float(np.linalg.norm(e_B))
    k = gains.kappa
    den = gains.delta_r ** (k + 1) * nB ** (k + 1) + gains.eps_r ** (k + 1)
    return -(gains.delta_r ** (k + 2) * nB ** k / den) * e_B


def robust_attitude_term(e_A: np.ndarray, gains: GeomGains) -> np.ndarray:
    """Bounded corrective moment: norm at most ``delta_R`` for any error."""
    e_A = np.asarray(e_A, dtype=float)
    nA = float(np.linalg.norm(e_A))
    return -(gains.delta_R ** 2 / (gains.delta_R * nA + gains.eps_R)) * e_A


def geometric_control(
    state: QuadState,
    ref: tuple,
    gains: GeomGains,
    p: SystemParams,
) -> ControlInput:
    """Thrust and torque from the robust geometric tracking law.

    Parameters
    ----------
    state : QuadState
        Current position, velocity, rotation, and body rates.
    ref : tuple
        ``(r_d, v_d, a_d, R_d, omega_d, omega_dot_d)`` desired position,
        velocity, acceleration, rotation, body angular velocity, and body
        angular acceleration.
    gains : GeomGains
    p : SystemParams
        Only the bare-vehicle mass and inertia enter the law; payload
        compensation is applied separately via :func:`feedforward_thrust`.

    Returns
    -------
    ControlInput
        Collective thrust (projection of the desired force on the current
        body-z axis) and body torque.
    """
    r_d, v_d, a_d, R_d, omega_d, omega_dot_d = ref
    R_d = np.asarray(R_d, dtype=float)
    omega_d = np.asarray(omega_d, dtype=float)
    omega_dot_d = np.asarray(omega_dot_d, dtype=float)

    e_r = state.r - np.asarray(r_d, dtype=float)
    e_v = state.v - np.asarray(v_d, dtype=float)
    e_B = e_v + (gains.c1 / p.m) * e_r
    mu_r = robust_position_term(e_B, gains)
    f_des = -gains.k_r * e_r - gains.k_v * e_v + p.m * p.g * E3 \
        + p.m * np.asarray(a_d, dtype=float) + mu_r
    F = float(f_des @ state.R @ E3)

    M = R_d.T @ state.R
    e_R = 0.5 * vee(M - M.T)
    RtRd = state.R.T @ R_d
    e_omega = state.omega - RtRd @ omega_d
    e_A = e_omega + gains.c2 * (e_R / p.J)
    mu_R = robust_attitude_term(e_A, gains)

    J_omega = p.J * state.omega
    tau = (
        -gains.k_R * e_R
        - gains.k_omega * e_omega
        + np.cross(state.omega, J_omega)
        - p.J * (hat(state.omega) @ RtRd @ omega_d - RtRd @ omega_dot_d + mu_R)
    )
    return ControlInput(F, tau)


def feedforward_thrust(F: float, R: np.ndarray, p: SystemParams) -> float:
    """Thrust augmented with the payload weight resolved along body z."""
    R = np.asarray(R, dtype=float)
    return float(F + p.m_L * p.g * (E3 @ R @ E3))


# ---------------------------------------------------------------------------
# continuous algebraic Riccati equation and LQR design
# ---------------------------------------------------------------------------

def care_residual(
    A: np.ndarray, B: np.ndarray, Q: np.ndarray, R: np.ndarray, P: np.ndarray
) -> float:
    """Frobenius norm of ``A'P + PA - P B R^-1 B' P + Q``."""
    G = B @ np.linalg.solve(R, B.T)
    return float(np.linalg.norm(A.T @ P + P @ A - P @ G @ P + Q))


def solve_care(
    A: np.ndarray,
    B: np.ndarray,
    Q: np.ndarray,
    R: np.ndarray,
    tol: float = 1e-9,
    max_iter: int = 100,
) -> np.ndarray:
    """Stabilizing solution of the continuous algebraic Riccati equation.

    Runs the determinant-scaled Newton iteration for the matrix sign of the
    Hamiltonian ``[[A, -B R^-1 B'], [-Q, -A']]`` and extracts the symmetric
    solution from the stable invariant subspace by least squares.

    Parameters
    ----------
    A, B : ndarray
        System matrices, shapes (n, n) and (n, m).
    Q, R : ndarray
        State weight (PSD, detectable pair with A) and input weight (PD).
    tol : float
        Relative Frobenius tolerance on the sign-iteration update.
    max_iter : int
        Iteration cap before :class:`RiccatiNoConvergence` is raised.

    Returns
    -------
    ndarray
        Symmetric positive semidefinite ``P`` with
        ``A'P + PA - P B R^-1 B' P + Q = 0``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    Q = np.asarray(Q, dtype=float)
    R = np.asarray(R, dtype=float)
    n = A.shape[0]
    G = B @ np.linalg.solve(R, B.T)
    H = np.block([[A, -G], [-Q, -A.T]])

    Z = H.copy()
    converged = False
    for _ in range(max_iter):
        try:
            Z_inv = np.linalg.inv(Z)
        except np.linalg.LinAlgError as exc:
            raise RiccatiNoConvergence("sign iteration hit a singular iterate") from exc
        sign, logdet = np.linalg.slogdet(Z)
        if sign == 0 or not np.isfinite(logdet):
            raise RiccatiNoConvergence("sign iteration hit a singular iterate")
        c = np.exp(logdet / (2 * n))
        Z_next = 0.5 * (Z / c + c * Z_inv)
        delta = np.linalg.norm(Z_next - Z)
        Z = Z_next
        if delta <= tol * np.linalg.norm(Z):
            converged = True
            break
    if not converged:
        raise RiccatiNoConvergence(f"sign iteration did not settle in {max_iter} steps")

    S11, S12 = Z[:n, :n], Z[:n, n:]
    S21, S22 = Z[n:, :n], Z[n:, n:]
    lhs = np.vstack([S12, S22 + np.eye(n)])
    rhs = -np.vstack([S11 + np.eye(n), S21])
    P = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
    return 0.5 * (P + P.T)


def _assert_stabilizable(A: np.ndarray, B: np.ndarray):
    """Eigenvector test: every non-decaying mode must be reachable."""
    n = A.shape[0]
    for lam in np.linalg.eigvals(A):
        if lam.real >= -1e-9:
            pencil = np.hstack([A - lam * np.eye(n), B])
            if np.linalg.matrix_rank(pencil) < n:
                raise NotStabilizable(
                    f"mode with eigenvalue {lam:.3e} is uncontrollable"
                )


def lqr_design(
    p: SystemParams,
    W_Q: np.ndarray | None = None,
    W_R: np.ndarray | None = None,
    tol: float = 1e-9,
) -> LqrGain:
    """LQR gain for the 14-state model about the loaded hover equilibrium.

    The equilibrium is level hover with the pendulum hanging: ``x0 = 0`` and
    ``u0`` the hover thrust of the complete vehicle (drone + hook + payload).
    Raises :class:`NotStabilizable` if a non-decaying mode is unreachable and
    :class:`RiccatiNoConvergence` if the Riccati solve fails its residual
    check or the closed loop is not Hurwitz.
    """
    if W_Q is None:
        W_Q = LQR_WEIGHTS_Q
    if W_R is None:
        W_R = LQR_WEIGHTS_R
    x0 = np.zeros(14)
    u0 = hover_input(p)
    A, B = linearize(x0, u0, p)
    _assert_stabilizable(A, B)
    P = solve_care(A, B, W_Q, W_R, tol=tol)
    resid = care_residual(A, B, W_Q, W_R, P)
    if resid > 1e-6 * max(1.0, float(np.linalg.norm(P))):
        raise RiccatiNoConvergence(f"Riccati residual {resid:.3e} too large")
    K = np.linalg.solve(W_R, B.T @ P)
    closed = A - B @ K
    if float(np.max(np.linalg.eigvals(closed).real)) >= 0.0:
        raise RiccatiNoConvergence("closed loop is not Hurwitz")
    return LqrGain(K, x0, u0, P)


def lqr_control(state: FullState, gain: LqrGain, region=None) -> ControlInput:
    """Affine state feedback ``u = u0 - K (x - x0)``.

    When an operating region is supplied (object with a 14-vector ``a`` of
    per-coordinate bounds), states outside it trigger a warning but the law
    is still evaluated.
    """
    x = state.as_vector()
    dx = x - gain.x0
    if region is not None and np.any(np.abs(dx) > np.asarray(region.a, dtype=float)):
        warnings.warn("state outside the operating region", stacklevel=2)
    u = gain.u0 - gain.K @ dx
    return ControlInput(float(u[0]), u[1:].copy())


# ---------------------------------------------------------------------------
# reference attitude pipeline and mission scheduling
# ---------------------------------------------------------------------------

def _desired_rotation(plan, t: float, mu_r: np.ndarray, p: SystemParams) -> np.ndarray:
    """Desired rotation at mission time t, tilted by the corrective force."""
    r_d, v_d, a_d, psi_d, _seg = plan.reference(t)
    f_des = p.m * (a_d + p.g * E3) + mu_r
    return attitude_from_force(f_des, psi_d)


def _skew_part(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M - M.T)


def reference_rotation(
    plan,
    t: float,
    p: SystemParams,
    mu_r: np.ndarray | None = None,
    h: float = 2e-3,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Desired rotation with body angular velocity and acceleration.

    The rotation is built from the planned acceleration and yaw (optionally
    tilted by the current corrective force, held fixed across the stencil);
    its first two time derivatives come from finite differences at step
    ``h``, the controller period.

    Returns
    -------
    (R_d, omega_d, omega_dot_d)
        Rotation, desired body angular velocity, and its time derivative.
    """
    if mu_r is None:
        mu_r = np.zeros(3)
    R0 = _desired_rotation(plan, t, mu_r, p)
    if t < h:
        R1 = _desired_rotation(plan, t + h, mu_r, p)
        R2 = _desired_rotation(plan, t + 2 * h, mu_r, p)
        R_dot = (-3.0 * R0 + 4.0 * R1 - R2) / (2 * h)
        R_ddot = (R0 - 2.0 * R1 + R2) / h**2
    else:
        Rm = _desired_rotation(plan, t - h, mu_r, p)
        Rp = _desired_rotation(plan, t + h, mu_r, p)
        R_dot = (Rp - Rm) / (2 * h)
        R_ddot = (Rp - 2.0 * R0 + Rm) / h**2
    omega_hat = _skew_part(R0.T @ R_dot)
    omega_d = vee(omega_hat)
    omega_dot_d = vee(_skew_part(R0.T @ R_ddot - omega_hat @ omega_hat))
    return R0, omega_d, omega_dot_d


def _quad_view(state: FullState) -> QuadState:
    """Geometric view of the full state: rotation matrix and body rates."""
    R = rotation_zyx(state.lam)
    omega = euler_rate_map(state.lam) @ state.lam_dot
    return QuadState(state.r.copy(), state.r_dot.copy(), R, omega)


def _regulation_state(state: FullState, r_set: np.ndarray, psi_set: float) -> np.ndarray:
    """State expressed relative to a hover setpoint, in its yaw frame.

    Rotating the horizontal coordinates into the setpoint's yaw frame keeps
    the feedback law consistent with a gain designed at zero yaw (the
    dynamics are equivariant under rotations about gravity).
    """
    cz, sz = np.cos(psi_set), np.sin(psi_set)
    Rz = np.array([[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]])
    x = np.zeros(14)
    x[0:3] = Rz.T @ (state.r - r_set)
    x[3:5] = state.lam[0:2]
    dpsi = state.lam[2] - psi_set
    x[5] = np.arctan2(np.sin(dpsi), np.cos(dpsi))
    x[6] = state.alpha
    x[7:10] = Rz.T @ state.r_dot
    x[10:13] = state.lam_dot
    x[13] = state.alpha_dot
    return x


def control_mode(t: float, plan) -> int:
    """Scheduled controller mode at mission time t (1, 2, or 3)."""
    seg = plan.reference(t)[4]
    if seg == 0:
        return MODE_LQR
    if seg in (3, 4):
        return MODE_GEOMETRIC_FF
    return MODE_GEOMETRIC


def scheduled_control(
    t: float,
    state: FullState,
    plan,
    gains: GeomGains,
    lqr: LqrGain,
    p: SystemParams,
) -> ControlInput:
    """Controller dispatch along the mission timeline.

    Unloaded segments use the geometric law, loaded segments add the payload
    feedforward, and during the hold window the reference is frozen at the
    drop-off hover and the LQR regulates the relative state with thrust
    saturated to [0, 4x hover].
    """
    r_d, v_d, a_d, psi_d, seg = plan.reference(t)
    if seg == 0:
        x_rel = _regulation_state(state, r_d, psi_d)
        u = lqr.u0 - lqr.K @ x_rel
        F = float(np.clip(u[0], 0.0, 4.0 * lqr.u0[0]))
        return ControlInput(F, u[1:].copy())

    quad = _quad_view(state)
    e_r = quad.r - r_d
    e_v = quad.v - v_d
    e_B = e_v + (gains.c1 / p.m) * e_r
    mu_r = robust_position_term(e_B, gains)
    R_d, omega_d, omega_dot_d = reference_rotation(plan, t, p, mu_r)
    u = geometric_control(quad, (r_d, v_d, a_d, R_d, omega_d, omega_dot_d), gains, p)
    if seg in (3, 4):
        return ControlInput(feedforward_thrust(u.F, quad.R, p), u.tau)
    return u
