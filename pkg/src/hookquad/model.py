"""Dynamics models of a quadrotor carrying a passive single-axis hook pendulum.

Two models live here and everything else in the package is built on top of
them:

* ``quad_dynamics`` -- the bare quadrotor rigid body: point mass plus Euler
  rotational dynamics on SO(3).
* ``full_dynamics`` -- the 7-DoF Euler-Lagrange model of drone + hook pole +
  (optional) payload.  Generalized coordinates are
  ``xi = (x, y, z, phi, theta, psi, alpha)`` with ZYX Euler angles
  ``lambda = (phi, theta, psi)`` and the hook swing angle ``alpha`` measured
  about the body-y axis relative to the body.

The hook pole of length ``L`` carries a point mass at its tip.  The tip mass
is the hook mass ``m_h`` plus the payload mass ``m_L`` when a payload is
attached; with both zero, the pendulum degree of freedom degenerates and the
model reduces exactly to the bare quadrotor.

All coefficient builders accept arrays with arbitrary leading batch
dimensions, which is what makes the lockstep Monte-Carlo simulation in
:mod:`hookquad.verify` affordable in pure numpy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateThrust, NotEquilibrium, SingularOrientation

E3 = np.array([0.0, 0.0, 1.0])

#: Pitch margin (rad) kept away from the Euler-map singularity at +/- pi/2.
PITCH_MARGIN = 0.1

_PARAM_KEYS = ("m", "Jx", "Jy", "Jz", "l", "L", "m_h", "d_h", "m_L", "g")


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters of the vehicle, hook, and payload.

    Lengths in meters, masses in kilograms, inertias in kg m^2.  ``l`` is the
    rotor arm length, ``L`` the hook pole length, ``m_h`` the hook mass,
    ``d_h`` the hook opening diameter, and ``m_L`` the attached payload mass
    (zero when flying unloaded).  Defaults are the bench quadrotor used
    throughout the test suite.
    """

    m: float = 0.605
    Jx: float = 1.5e-3
    Jy: float = 1.45e-3
    Jz: float = 2.66e-3
    l: float = 0.083
    L: float = 0.4
    m_h: float = 0.01
    d_h: float = 0.04
    m_L: float = 0.0
    g: float = 9.81

    def __post_init__(self):
        for name in ("m", "Jx", "Jy", "Jz", "l", "L", "g"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("m_h", "d_h", "m_L"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)}")
        if self.d_h >= self.L:
            raise ValueError(f"hook diameter d_h={self.d_h} must be smaller than pole length L={self.L}")

    @property
    def J(self) -> np.ndarray:
        """Diagonal body inertia as a (3,) array."""
        return np.array([self.Jx, self.Jy, self.Jz])

    @property
    def J_mat(self) -> np.ndarray:
        return np.diag(self.J)

    @property
    def tip_mass(self) -> float:
        """Point mass at the hook tip: hook plus attached payload."""
        return self.m_h + self.m_L

    @property
    def total_mass(self) -> float:
        return self.m + self.tip_mass

    @property
    def hover_thrust(self) -> float:
        """Thrust that balances the weight of drone + hook + payload."""
        return self.total_mass * self.g

    def with_payload(self, m_L: float) -> "SystemParams":
        return replace(self, m_L=m_L)

    def to_dict(self) -> dict:
        return {k: float(getattr(self, k)) for k in _PARAM_KEYS}

    @classmethod
    def from_dict(cls, data: dict) -> "SystemParams":
        unknown = set(data) - set(_PARAM_KEYS)
        if unknown:
            raise ValueError(f"unknown parameter keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})

    @classmethod
    def from_json(cls, path) -> "SystemParams":
        with open(path) as f:
            return cls.from_dict(json.load(f))


@dataclass
class QuadState:
    """Bare-quadrotor state: position, velocity, rotation matrix, body rates."""

    r: np.ndarray
    v: np.ndarray
    R: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.R = np.asarray(self.R, dtype=float)
        self.omega = np.asarray(self.omega, dtype=float)
        if self.r.shape != (3,) or self.v.shape != (3,) or self.omega.shape != (3,):
            raise ValueError("r, v, omega must be (3,) vectors")
        if self.R.shape != (3, 3):
            raise ValueError("R must be a 3x3 matrix")
        if not np.allclose(self.R.T @ self.R, np.eye(3), atol=1e-9):
            raise ValueError("R must be orthonormal to 1e-9")


@dataclass
class FullState:
    """Generalized coordinates and velocities of the 7-DoF model."""

    xi: np.ndarray
    xi_dot: np.ndarray

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float)
        self.xi_dot = np.asarray(self.xi_dot, dtype=float)
        if self.xi.shape != (7,) or self.xi_dot.shape != (7,):
            raise ValueError("xi and xi_dot must be (7,) vectors")

    @property
    def r(self) -> np.ndarray:
        return self.xi[0:3]

    @property
    def lam(self) -> np.ndarray:
        """Euler angles (phi, theta, psi)."""
        return self.xi[3:6]

    @property
    def alpha(self) -> float:
        return float(self.xi[6])

    @property
    def r_dot(self) -> np.ndarray:
        return self.xi_dot[0:3]

    @property
    def lam_dot(self) -> np.ndarray:
        return self.xi_dot[3:6]

    @property
    def alpha_dot(self) -> float:
        return float(self.xi_dot[6])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.xi, self.xi_dot])

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "FullState":
        x = np.asarray(x, dtype=float)
        if x.shape != (14,):
            raise ValueError("state vector must have shape (14,)")
        return cls(x[:7].copy(), x[7:].copy())


@dataclass
class ControlInput:
    """Collective thrust F (N) along body z and body torques tau (N m)."""

    F: float
    tau: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.F = float(self.F)
        self.tau = np.asarray(self.tau, dtype=float)
        if self.tau.shape != (3,):
            raise ValueError("tau must be a (3,) vector")

    def as_vector(self) -> np.ndarray:
        return np.concatenate([[self.F], self.tau])


# ---------------------------------------------------------------------------
# rotation kinematics (batched: lam has shape (..., 3))
# ---------------------------------------------------------------------------

def hat(v: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix of v, batched over leading dimensions."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def vee(M: np.ndarray) -> np.ndarray:
    """Inverse of :func:`hat` for (batched) skew-symmetric matrices."""
    M = np.asarray(M, dtype=float)
    return np.stack([M[..., 2, 1], M[..., 0, 2], M[..., 1, 0]], axis=-1)


def rotation_zyx(lam: np.ndarray) -> np.ndarray:
    """Rotation matrix R = Rz(psi) Ry(theta) Rx(phi) for ZYX Euler angles."""
    lam = np.asarray(lam, dtype=float)
    cf, sf = np.cos(lam[..., 0]), np.sin(lam[..., 0])
    ct, st = np.cos(lam[..., 1]), np.sin(lam[..., 1])
    cp, sp = np.cos(lam[..., 2]), np.sin(lam[..., 2])
    R = np.empty(lam.shape[:-1] + (3, 3))
    R[..., 0, 0] = cp * ct
    R[..., 0, 1] = cp * st * sf - sp * cf
    R[..., 0, 2] = cp * st * cf + sp * sf
    R[..., 1, 0] = sp * ct
    R[..., 1, 1] = sp * st * sf + cp * cf
    R[..., 1, 2] = sp * st * cf - cp * sf
    R[..., 2, 0] = -st
    R[..., 2, 1] = ct * sf
    R[..., 2, 2] = ct * cf
    return R


def rotation_zyx_partials(lam: np.ndarray) -> np.ndarray:
    """Stacked dR/dphi, dR/dtheta, dR/dpsi with shape (..., 3, 3, 3)."""
    lam = np.asarray(lam, dtype=float)
    cf, sf = np.cos(lam[..., 0]), np.sin(lam[..., 0])
    ct, st = np.cos(lam[..., 1]), np.sin(lam[..., 1])
    cp, sp = np.cos(lam[..., 2]), np.sin(lam[..., 2])
    dR = np.zeros(lam.shape[:-1] + (3, 3, 3))
    # d/dphi
    dR[..., 0, 0, 1] = cp * st * cf + sp * sf
    dR[..., 0, 0, 2] = -cp * st * sf + sp * cf
    dR[..., 0, 1, 1] = sp * st * cf - cp * sf
    dR[..., 0, 1, 2] = -sp * st * sf - cp * cf
    dR[..., 0, 2, 1] = ct * cf
    dR[..., 0, 2, 2] = -ct * sf
    # d/dtheta
    dR[..., 1, 0, 0] = -cp * st
    dR[..., 1, 0, 1] = cp * ct * sf
    dR[..., 1, 0, 2] = cp * ct * cf
    dR[..., 1, 1, 0] = -sp * st
    dR[..., 1, 1, 1] = sp * ct * sf
    dR[..., 1, 1, 2] = sp * ct * cf
    dR[..., 1, 2, 0] = -ct
    dR[..., 1, 2, 1] = -st * sf
    dR[..., 1, 2, 2] = -st * cf
    # d/dpsi
    dR[..., 2, 0, 0] = -sp * ct
    dR[..., 2, 0, 1] = -sp * st * sf - cp * cf
    dR[..., 2, 0, 2] = -sp * st * cf + cp * sf
    dR[..., 2, 1, 0] = cp * ct
    dR[..., 2, 1, 1] = cp * st * sf - sp * cf
    dR[..., 2, 1, 2] = cp * st * cf + sp * sf
    return dR


def euler_rate_map(lam: np.ndarray) -> np.ndarray:
    """Map Q(lam) with body rates omega = Q @ lam_dot (ZYX convention)."""
    lam = np.asarray(lam, dtype=float)
    cf, sf = np.cos(lam[..., 0]), np.sin(lam[..., 0])
    ct, st = np.cos(lam[..., 1]), np.sin(lam[..., 1])
    Q = np.zeros(lam.shape[:-1] + (3, 3))
    Q[..., 0, 0] = 1.0
    Q[..., 0, 2] = -st
    Q[..., 1, 1] = cf
    Q[..., 1, 2] = sf * ct
    Q[..., 2, 1] = -sf
    Q[..., 2, 2] = cf * ct
    return Q


def euler_rate_map_partials(lam: np.ndarray) -> np.ndarray:
    """Stacked dQ/dphi, dQ/dtheta, dQ/dpsi with shape (..., 3, 3, 3)."""
    lam = np.asarray(lam, dtype=float)
    cf, sf = np.cos(lam[..., 0]), np.sin(lam[..., 0])
    ct, st = np.cos(lam[..., 1]), np.sin(lam[..., 1])
    dQ = np.zeros(lam.shape[:-1] + (3, 3, 3))
    dQ[..., 0, 1, 1] = -sf
    dQ[..., 0, 1, 2] = cf * ct
    dQ[..., 0, 2, 1] = -cf
    dQ[..., 0, 2, 2] = -sf * ct
    dQ[..., 1, 0, 2] = -ct
    dQ[..., 1, 1, 2] = -sf * st
    dQ[..., 1, 2, 2] = -cf * st
    return dQ


def pitch_is_singular(lam: np.ndarray, margin: float = PITCH_MARGIN) -> np.ndarray:
    """Boolean mask where the pitch angle is within ``margin`` of +/- pi/2."""
    lam = np.asarray(lam, dtype=float)
    return np.abs(lam[..., 1]) > np.pi / 2.0 - margin


def _check_pitch(lam: np.ndarray):
    if np.any(pitch_is_singular(lam)):
        theta = np.asarray(lam, dtype=float)[..., 1]
        raise SingularOrientation(
            f"pitch angle {np.max(np.abs(theta)):.4f} rad is within {PITCH_MARGIN} rad "
            "of the Euler-map singularity at +/- pi/2"
        )


# ---------------------------------------------------------------------------
# bare quadrotor
# ---------------------------------------------------------------------------

def quad_dynamics(state: QuadState, u: ControlInput, p: SystemParams):
    """Rigid-body accelerations of the bare quadrotor.

    Returns ``(r_ddot, R_dot, omega_dot)`` for

    .. math::
        m \\ddot r = -m g e_3 + F R e_3, \\qquad
        \\dot R = R \\hat\\omega, \\qquad
        J \\dot\\omega = \\tau - \\omega \\times J \\omega.
    """
    r_ddot = -p.g * E3 + (u.F / p.m) * state.R[:, 2]
    R_dot = state.R @ hat(state.omega)
    omega_dot = (u.tau - np.cross(state.omega, p.J * state.omega)) / p.J
    return r_ddot, R_dot, omega_dot


# ---------------------------------------------------------------------------
# 7-DoF Euler-Lagrange coefficient matrices (batched)
# ---------------------------------------------------------------------------

def _pendulum_vectors(alpha: np.ndarray, L: float):
    """Body-frame tip offset rho(alpha) and its alpha-derivative."""
    alpha = np.asarray(alpha, dtype=float)
    ca, sa = np.cos(alpha), np.sin(alpha)
    rho = np.stack([-L * sa, np.zeros_like(sa), -L * ca], axis=-1)
    drho = np.stack([-L * ca, np.zeros_like(sa), L * sa], axis=-1)
    return rho, drho


def _coefficients(xi: np.ndarray, p: SystemParams, want_partials: bool):
    """Shared assembly of H, G, Xi (and coordinate partials of H).

    ``xi`` has shape (..., 7).  Returns a dict with keys ``H`` (..., 7, 7),
    ``G`` (..., 7), ``Xi`` (..., 7, 4) and, when requested, ``dH``
    (..., 4, 7, 7) holding dH/dphi, dH/dtheta, dH/dpsi, dH/dalpha.
    """
    xi = np.asarray(xi, dtype=float)
    batch = xi.shape[:-1]
    lam = xi[..., 3:6]
    alpha = xi[..., 6]
    mp = p.tip_mass
    J = p.J

    R = rotation_zyx(lam)
    Q = euler_rate_map(lam)
    rho, drho = _pendulum_vectors(alpha, p.L)
    hat_rho = hat(rho)

    # velocity Jacobian of the tip position:  r_L_dot = r_dot + B lam_dot + b alpha_dot
    B = -(R @ hat_rho @ Q)
    b = (R @ drho[..., :, None])[..., 0]

    JQ = J[:, None] * Q  # diag(J) @ Q, batched
    Qt = np.swapaxes(Q, -1, -2)
    QtJQ = Qt @ JQ

    H = np.zeros(batch + (7, 7))
    H[..., 0, 0] = H[..., 1, 1] = H[..., 2, 2] = p.m + mp
    H[..., 0:3, 3:6] = mp * B
    H[..., 3:6, 0:3] = mp * np.swapaxes(B, -1, -2)
    H[..., 0:3, 6] = mp * b
    H[..., 6, 0:3] = mp * b
    Bt = np.swapaxes(B, -1, -2)
    H[..., 3:6, 3:6] = QtJQ + mp * (Bt @ B)
    Btb = (Bt @ b[..., :, None])[..., 0]
    H[..., 3:6, 6] = mp * Btb
    H[..., 6, 3:6] = mp * Btb
    H[..., 6, 6] = mp * p.L ** 2

    # gravity gradient G = dU/dxi with U = (m + mp) g z + mp g e3 . (R rho)
    G = np.zeros(batch + (7,))
    G[..., 2] = (p.m + mp) * p.g
    dR = rotation_zyx_partials(lam)
    dR_rho = (dR @ rho[..., None, :, None])[..., 0]  # (..., 3, 3)
    G[..., 3:6] = mp * p.g * dR_rho[..., 2]
    G[..., 6] = mp * p.g * b[..., 2]

    # input map Xi: thrust enters along R e3, torques through Q^T
    Xi = np.zeros(batch + (7, 4))
    Xi[..., 0:3, 0] = R[..., :, 2]
    Xi[..., 3:6, 1:4] = np.swapaxes(Q, -1, -2)

    out = {"H": H, "G": G, "Xi": Xi, "R": R, "Q": Q, "B": B, "b": b}
    if not want_partials:
        return out

    dQ = euler_rate_map_partials(lam)
    # dB/dlam_n = -(dR_n hat(rho) Q + R hat(rho) dQ_n); dB/dalpha = -R hat(drho) Q
    hrQ = hat_rho @ Q
    Rhr = R @ hat_rho
    dB = np.empty(batch + (4, 3, 3))
    dB[..., 0:3, :, :] = -(dR @ hrQ[..., None, :, :] + Rhr[..., None, :, :] @ dQ)
    dB[..., 3, :, :] = -(R @ hat(drho) @ Q)
    # db/dlam_n = dR_n drho; db/dalpha = R d2rho = -R rho
    db = np.empty(batch + (4, 3))
    db[..., 0:3, :] = (dR @ drho[..., None, :, None])[..., 0]
    db[..., 3, :] = -(R @ rho[..., :, None])[..., 0]
    # d(Q^T J Q)/dlam_n
    dQtJQ = np.swapaxes(dQ, -1, -2) @ JQ[..., None, :, :]
    dQtJQ = dQtJQ + np.swapaxes(dQtJQ, -1, -2)

    dH = np.zeros(batch + (4, 7, 7))
    dH[..., :, 0:3, 3:6] = mp * dB
    dH[..., :, 3:6, 0:3] = mp * np.swapaxes(dB, -1, -2)
    dH[..., :, 0:3, 6] = mp * db
    dH[..., :, 6, 0:3] = mp * db
    dBt = np.swapaxes(dB, -1, -2)
    dBtB = dBt @ B[..., None, :, :]
    dBtB = dBtB + np.swapaxes(dBtB, -1, -2)
    dH[..., 0:3, 3:6, 3:6] = dQtJQ + mp * dBtB[..., 0:3, :, :]
    dH[..., 3, 3:6, 3:6] = mp * dBtB[..., 3, :, :]
    dBtb = (dBt @ b[..., None, :, None])[..., 0] + db @ B
    dH[..., :, 3:6, 6] = mp * dBtb
    dH[..., :, 6, 3:6] = mp * dBtb
    out["dH"] = dH
    return out


def _coriolis(dH: np.ndarray, xi_dot: np.ndarray) -> np.ndarray:
    """Coriolis matrix from Christoffel symbols of the first kind.

    ``C[i, j] = 0.5 * sum_k (dH_k[i, j] + dH_j[i, k] - dH_i[j, k]) xi_dot[k]``
    where only the partials with respect to the four angle coordinates are
    nonzero.  This convention makes ``H_dot - 2 C`` skew-symmetric.
    """
    batch = xi_dot.shape[:-1]
    qd_ang = xi_dot[..., 3:7]
    C = np.zeros(batch + (7, 7))
    term1 = np.einsum("...kij,...k->...ij", dH, qd_ang)
    # sum_k dH_j[i, k] xi_dot[k]: nonzero only for columns j in 3..6
    term2 = np.einsum("...jik,...k->...ij", dH, xi_dot)
    # sum_k dH_i[j, k] xi_dot[k]: nonzero only for rows i in 3..6
    term3 = np.swapaxes(term2, -1, -2)
    C += 0.5 * term1
    C[..., :, 3:7] += 0.5 * term2
    C[..., 3:7, :] -= 0.5 * term3
    return C


def _coriolis_times_qd(dH: np.ndarray, xi_dot: np.ndarray) -> np.ndarray:
    """Fused product C(xi, xi_dot) @ xi_dot without materializing C.

    Using the Christoffel form,
    ``(C qd)_i = sum_k qd_k (dH_k qd)_i - 0.5 * qd^T dH_i qd`` where the last
    term is nonzero only for the four angle rows.
    """
    qd_ang = xi_dot[..., 3:7]
    Mv = np.einsum("...kij,...j->...ki", dH, xi_dot)  # (..., 4, 7)
    out = np.einsum("...k,...ki->...i", qd_ang, Mv)
    w = np.einsum("...ki,...i->...k", Mv, xi_dot)  # qd^T dH_k qd
    out[..., 3:7] -= 0.5 * w
    return out


def lagrangian_matrices(state: FullState, p: SystemParams):
    """Coefficient matrices (H, C, G, Xi) of the 7-DoF model at ``state``.

    ``H`` is the symmetric positive-semidefinite mass matrix, ``C`` the
    Coriolis matrix built from Christoffel symbols of the first kind (so that
    ``H_dot - 2C`` is skew-symmetric), ``G`` the gravity gradient, and ``Xi``
    the 7x4 input map for ``u = (F, tau)``.

    Raises
    ------
    SingularOrientation
        If the pitch angle is within :data:`PITCH_MARGIN` of +/- pi/2.
    """
    _check_pitch(state.xi[3:6])
    co = _coefficients(state.xi, p, want_partials=True)
    C = _coriolis(co["dH"], state.xi_dot)
    return co["H"], C, co["G"], co["Xi"]


def _solve_accel(H, rhs, tip_mass):
    """Solve H @ xi_ddot = rhs, handling the massless-pendulum degeneracy."""
    if tip_mass <= 0.0:
        # alpha row/column vanish: solve the 6x6 block, alpha_ddot := 0
        acc6 = np.linalg.solve(H[..., :6, :6], rhs[..., :6, None])[..., 0]
        return np.concatenate([acc6, np.zeros(acc6.shape[:-1] + (1,))], axis=-1)
    return np.linalg.solve(H, rhs[..., None])[..., 0]


def full_dynamics_batch(xi: np.ndarray, xi_dot: np.ndarray, u: np.ndarray, p: SystemParams) -> np.ndarray:
    """Generalized accelerations ``xi_ddot`` for batched states and inputs.

    ``xi``, ``xi_dot`` have shape (..., 7) and ``u`` (..., 4).  No pitch
    singularity check is performed here; batch callers guard it themselves.
    """
    co = _coefficients(xi, p, want_partials=True)
    rhs = (
        np.einsum("...ij,...j->...i", co["Xi"], u)
        - _coriolis_times_qd(co["dH"], np.asarray(xi_dot, dtype=float))
        - co["G"]
    )
    return _solve_accel(co["H"], rhs, p.tip_mass)


def full_dynamics(state: FullState, u: ControlInput, p: SystemParams) -> np.ndarray:
    """Generalized accelerations of the 7-DoF model (shape (7,)).

    Solves ``H xi_ddot = Xi u - C xi_dot - G``.  With ``m_h = m_L = 0`` the
    swing coordinate is massless and its acceleration is reported as zero.
    """
    _check_pitch(state.xi[3:6])
    return full_dynamics_batch(state.xi, state.xi_dot, u.as_vector(), p)


def state_derivative(x: np.ndarray, u: np.ndarray, p: SystemParams) -> np.ndarray:
    """First-order form f(x, u) = [xi_dot, xi_ddot] for the 14-state model."""
    x = np.asarray(x, dtype=float)
    acc = full_dynamics_batch(x[..., :7], x[..., 7:], u, p)
    return np.concatenate([x[..., 7:], acc], axis=-1)


def kinetic_energy(state: FullState, p: SystemParams) -> float:
    co = _coefficients(state.xi, p, want_partials=False)
    return 0.5 * float(state.xi_dot @ co["H"] @ state.xi_dot)


def potential_energy(state: FullState, p: SystemParams) -> float:
    rho, _ = _pendulum_vectors(state.xi[6], p.L)
    R = rotation_zyx(state.xi[3:6])
    tip_z = state.xi[2] + (R @ rho)[2]
    return float(p.m * p.g * state.xi[2] + p.tip_mass * p.g * tip_z)


def total_energy(state: FullState, p: SystemParams) -> float:
    """Kinetic plus potential energy; conserved when u = 0."""
    return kinetic_energy(state, p) + potential_energy(state, p)


def hook_tip_position(state: FullState, p: SystemParams) -> np.ndarray:
    """World position of the hook tip r + R rho(alpha)."""
    rho, _ = _pendulum_vectors(state.xi[6], p.L)
    return state.xi[0:3] + rotation_zyx(state.xi[3:6]) @ rho


def hover_state(p: SystemParams, r: np.ndarray | None = None, psi: float = 0.0) -> FullState:
    """Equilibrium state: hanging pendulum, level attitude, at rest."""
    xi = np.zeros(7)
    if r is not None:
        xi[0:3] = np.asarray(r, dtype=float)
    xi[5] = psi
    return FullState(xi, np.zeros(7))


def hover_input(p: SystemParams) -> np.ndarray:
    """Equilibrium input (hover thrust of the loaded vehicle, zero torque)."""
    return np.array([p.hover_thrust, 0.0, 0.0, 0.0])


def linearize(x0: np.ndarray, u0: np.ndarray, p: SystemParams, eps: float = 1e-6, eq_tol: float = 1e-6):
    """Jacobians (A, B) of the 14-state dynamics at an equilibrium.

    Central finite differences with step ``eps``.  Raises
    :class:`NotEquilibrium` when ``||f(x0, u0)||_inf > eq_tol``.
    """
    x0 = np.asarray(x0, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    f0 = state_derivative(x0, u0, p)
    resid = float(np.max(np.abs(f0)))
    if resid > eq_tol:
        raise NotEquilibrium(f"||f(x0, u0)||_inf = {resid:.3e} exceeds {eq_tol:.1e}")

    n, m = x0.size, u0.size
    A = np.empty((n, n))
    for i in range(n):
        dx = np.zeros(n)
        dx[i] = eps
        A[:, i] = (state_derivative(x0 + dx, u0, p) - state_derivative(x0 - dx, u0, p)) / (2 * eps)
    B = np.empty((n, m))
    for j in range(m):
        du = np.zeros(m)
        du[j] = eps
        B[:, j] = (state_derivative(x0, u0 + du, p) - state_derivative(x0, u0 - du, p)) / (2 * eps)
    return A, B


def attitude_from_force(f_des: np.ndarray, psi: float) -> np.ndarray:
    """Rotation whose body-z axis aligns with ``f_des`` and heading ``psi``.

    The body-x axis is the projection of the heading direction
    ``(cos psi, sin psi, 0)`` onto the plane orthogonal to body-z.

    Raises
    ------
    DegenerateThrust
        If ``f_des`` has (numerically) zero norm or is parallel to the
        heading direction.
    """
    f_des = np.asarray(f_des, dtype=float)
    norm = np.linalg.norm(f_des)
    if norm < 1e-9:
        raise DegenerateThrust("desired force vector has zero norm")
    b3 = f_des / norm
    xc = np.array([np.cos(psi), np.sin(psi), 0.0])
    b2 = np.cross(b3, xc)
    n2 = np.linalg.norm(b2)
    if n2 < 1e-9:
        raise DegenerateThrust("desired thrust parallel to heading direction")
    b2 /= n2
    b1 = np.cross(b2, b3)
    return np.column_stack([b1, b2, b3])


def flat_outputs_to_attitude(r_ddot_d: np.ndarray, psi_d: float, p: SystemParams) -> np.ndarray:
    """Desired attitude R_d from desired acceleration and yaw.

    The desired thrust vector is ``m (r_ddot_d + g e3)``; its direction is the
    body-z axis of R_d and ``psi_d`` sets the heading of body-x.
    """
    f_des = p.m * (np.asarray(r_ddot_d, dtype=float) + p.g * E3)
    return attitude_from_force(f_des, psi_d)


def euler_zyx_from_rotation(R: np.ndarray) -> np.ndarray:
    """Euler angles (phi, theta, psi) of R in the ZYX convention."""
    R = np.asarray(R, dtype=float)
    theta = np.arcsin(np.clip(-R[..., 2, 0], -1.0, 1.0))
    phi = np.arctan2(R[..., 2, 1], R[..., 2, 2])
    psi = np.arctan2(R[..., 1, 0], R[..., 0, 0])
    return np.stack([phi, theta, psi], axis=-1)
