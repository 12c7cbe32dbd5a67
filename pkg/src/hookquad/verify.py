"""Probabilistic closed-loop certification and disturbance-bound estimation.

Three pieces: the sample-count formula of the scenario approach (how many
random initial states are needed to certify a region of attraction at a
given confidence), a batched Monte-Carlo certifier that simulates the
LQR-controlled vehicle from those samples, and a multi-start maximization of
the model mismatch between the full hook-and-payload dynamics and the bare
quadrotor model, which calibrates the robust-control bounds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .control import LqrGain
from .model import SystemParams, euler_rate_map, euler_rate_map_partials, full_dynamics_batch

__all__ = [
    "OperatingRegion",
    "Certificate",
    "violation_bound",
    "scenario_sample_count",
    "certify_roa",
    "disturbance_bounds",
]


@dataclass
class OperatingRegion:
    """Axis-aligned state box around the regulation point plus an input box.

    ``a`` holds per-coordinate absolute bounds on the 14 state coordinates;
    ``u_lo``/``u_hi`` bound the four input channels (F, tau).
    """

    a: np.ndarray
    u_lo: np.ndarray
    u_hi: np.ndarray

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.u_lo = np.asarray(self.u_lo, dtype=float)
        self.u_hi = np.asarray(self.u_hi, dtype=float)
        if self.a.shape != (14,) or np.any(self.a <= 0):
            raise ValueError("a must be 14 positive bounds")
        if self.u_lo.shape != (4,) or self.u_hi.shape != (4,):
            raise ValueError("input bounds must have shape (4,)")
        if np.any(self.u_lo >= self.u_hi):
            raise ValueError("input box must have positive volume")

    @classmethod
    def default(cls, p: SystemParams) -> "OperatingRegion":
        """Bench region with a near-hover input envelope.

        State box: 0.2 rad (rad/s) on the swing coordinates, 0.1 elsewhere.
        Input box: the thrust commands seen in closed loop stay close to the
        compensated hover value, so F ranges over (m + m_L) g plus or minus
        one bare-mass unit of the planner's acceleration bound (1 m/s^2);
        torque commands stay within 0.01 N m per axis (about twice the
        values commanded during nominal missions).  A wider thrust box would
        be dominated by thrust values the controller never commands and
        would inflate the mismatch bounds far beyond what the robust terms
        need to reject in flight.
        """
        a = np.full(14, 0.1)
        a[6] = a[13] = 0.2
        F_mid = (p.m + p.m_L) * p.g
        dF = 1.0 * p.m
        return cls(
            a,
            np.array([max(F_mid - dF, 0.0), -0.01, -0.01, -0.01]),
            np.array([F_mid + dF, 0.01, 0.01, 0.01]),
        )


@dataclass
class Certificate:
    """Outcome of a sampled region-of-attraction check."""

    N: int
    beta: float
    epsilon: float
    decision: str
    failures: list = field(default_factory=list)
    seed: int = 0
    T_sim: float = 20.0
    r_conv: float = 1e-3

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "beta": self.beta,
            "epsilon": self.epsilon,
            "decision": self.decision,
            "failed_samples": [list(map(float, f)) for f in self.failures],
            "seed": self.seed,
            "T_sim": self.T_sim,
            "r_conv": self.r_conv,
        }

    def save_json(self, path: str):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)


def violation_bound(N: int, beta: float) -> float:
    """Violation probability certified by N i.i.d. samples at confidence beta.

    Evaluates ``1 - (beta / N^2)^(1/(N-1))``.
    """
    if N < 2:
        raise ValueError("need at least two samples")
    return 1.0 - np.exp((np.log(beta) - 2.0 * np.log(N)) / (N - 1))


def scenario_sample_count(beta: float, epsilon_target: float, exact: bool = False) -> int:
    """Number of i.i.d. samples needed to certify the target violation bound.

    Bisection on the monotone map :func:`violation_bound` finds the smallest
    admissible N.  By default the count is rounded up to the next multiple
    of 1000 — sample budgets are planned in round batches, and the rounded
    count certifies a strictly smaller violation bound.  Pass ``exact=True``
    for the un-rounded minimizer.
    """
    if not (0.0 < beta < 1.0) or not (0.0 < epsilon_target < 1.0):
        raise ValueError("beta and epsilon_target must lie in (0, 1)")
    lo, hi = 2, 2
    while violation_bound(hi, beta) > epsilon_target:
        lo, hi = hi, hi * 2
        if hi > 10**12:
            raise ValueError("sample count out of range")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if violation_bound(mid, beta) <= epsilon_target:
            hi = mid
        else:
            lo = mid
    if exact:
        return hi
    return -(-hi // 1000) * 1000


def certify_roa(
    region: OperatingRegion,
    gain: LqrGain,
    p: SystemParams,
    N: int = 1000,
    beta: float = 1e-6,
    T_sim: float = 20.0,
    r_conv: float = 1e-3,
    dt: float = 2e-3,
    control_dt: float = 2e-3,
    seed: int = 12345,
) -> Certificate:
    """Sampled region-of-attraction certificate for the regulated loop.

    Draws N uniform i.i.d. initial states in the region box (seeded), then
    integrates all closed-loop trajectories in lockstep with RK4 and
    zero-order-hold feedback.  The decision is "stable" exactly when every
    trajectory ends within ``r_conv`` of the regulation point.  Trajectories
    that blow up are recorded as failures and stop being integrated.

    The certified violation bound depends only on (N, beta); an unstable
    decision is still a valid certificate.
    """
    eps = violation_bound(N, beta)
    # One master seed spawns an independent stream per sample, so the draw
    # for sample i does not depend on how the batch is split across workers.
    streams = np.random.SeedSequence(seed).spawn(N)
    X0 = gain.x0 + np.stack(
        [np.random.default_rng(s).uniform(-region.a, region.a) for s in streams]
    )
    substeps = int(round(control_dt / dt))
    if abs(control_dt / dt - substeps) > 1e-9 or substeps < 1:
        raise ValueError("control_dt must be an integer multiple of dt")
    n_ticks = int(round(T_sim / control_dt))

    x = X0.copy()
    alive = np.ones(N, dtype=bool)

    def f_batch(xb, ub):
        acc = full_dynamics_batch(xb[:, :7], xb[:, 7:], ub, p)
        return np.concatenate([xb[:, 7:], acc], axis=1)

    for k in range(n_ticks):
        xa = x[alive]
        u = gain.u0 - (xa - gain.x0) @ gain.K.T
        for _ in range(substeps):
            k1 = f_batch(xa, u)
            k2 = f_batch(xa + 0.5 * dt * k1, u)
            k3 = f_batch(xa + 0.5 * dt * k2, u)
            k4 = f_batch(xa + dt * k3, u)
            xa = xa + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        x[alive] = xa
        bad = ~np.isfinite(xa).all(axis=1) | (np.linalg.norm(xa, axis=1) > 1e6)
        if np.any(bad):
            idx = np.flatnonzero(alive)[bad]
            alive[idx] = False

    final_err = np.linalg.norm(x - gain.x0, axis=1)
    converged = alive & (final_err < r_conv)
    failures = [X0[i] for i in np.flatnonzero(~converged)]
    decision = "stable" if not failures else "unstable"
    return Certificate(N, beta, eps, decision, failures, seed, T_sim, r_conv)


# ---------------------------------------------------------------------------
# disturbance-bound estimation (model mismatch maximization)
# ---------------------------------------------------------------------------

def _mismatch(x: np.ndarray, u: np.ndarray, p: SystemParams):
    """Force and moment model mismatch at batched states/inputs.

    The plant is the full hook-and-payload model driven by the thrust the
    loop actually applies, i.e. the commanded F plus the gravity
    feedforward for the carried payload; the nominal model underlying the
    robust control design is the bare quadrotor (mass m, inertia J)
    receiving the commanded F alone.  The mismatch is expressed as a force
    ``m * (rdd_full - rdd_quad)`` and a moment
    ``J om_dot_full + om x J om - tau``.
    """
    x = np.atleast_2d(x)
    u = np.atleast_2d(u)
    xi, xi_dot = x[:, :7], x[:, 7:]
    lam, lam_dot = xi[:, 3:6], xi_dot[:, 3:6]

    from .model import rotation_zyx

    R = rotation_zyx(lam)
    u_plant = u.copy()
    u_plant[:, 0] += p.m_L * p.g * R[..., 2, 2]
    acc = full_dynamics_batch(xi, xi_dot, u_plant, p)

    # translational channel of the nominal model: m rdd = -m g e3 + F R e3
    f_quad_r = -p.g * np.array([0.0, 0.0, 1.0]) + (u[:, 0:1] / p.m) * R[..., :, 2]
    d_r = p.m * (acc[:, 0:3] - f_quad_r)

    # rotational channel: om = Q lam_dot; om_dot = Q lam_dd + Qdot lam_dot
    Q = euler_rate_map(lam)
    dQ = euler_rate_map_partials(lam)
    omega = (Q @ lam_dot[..., :, None])[..., 0]
    Q_dot = np.einsum("...nij,...n->...ij", dQ, lam_dot)
    om_dot = (Q @ acc[:, 3:6, None])[..., 0] + (Q_dot @ lam_dot[..., :, None])[..., 0]
    J = p.J
    f_full_w = J * om_dot
    f_quad_w = u[:, 1:4] - np.cross(omega, J * omega)
    d_R = f_full_w - f_quad_w
    return np.linalg.norm(d_r, axis=1), np.linalg.norm(d_R, axis=1)


def _latin_hypercube(rng, lo, hi, n):
    dim = lo.size
    pts = (rng.permuted(np.tile(np.arange(n), (dim, 1)), axis=1).T + rng.random((n, dim))) / n
    return lo + pts * (hi - lo)


def disturbance_bounds(
    region: OperatingRegion,
    p: SystemParams,
    n_probe: int = 10_000,
    n_starts: int = 64,
    n_iter: int = 120,
    inflation: float = 1.1,
    seed: int = 7,
) -> tuple[float, float]:
    """Bounds on the force/moment mismatch over the operating region.

    Latin-hypercube probing of the joint state-input box seeds a projected
    gradient ascent (finite-difference gradients) from the best starts; the
    largest value found for each channel is inflated by ``inflation`` to
    account for the local method underestimating the true maximum.

    Returns
    -------
    (delta_r, delta_R)
        Force bound in N and moment bound in N m.
    """
    if p.tip_mass == 0.0:
        return 0.0, 0.0
    rng = np.random.default_rng(seed)
    lo = np.concatenate([-region.a, region.u_lo])
    hi = np.concatenate([region.a, region.u_hi])

    probes = _latin_hypercube(rng, lo, hi, n_probe)
    vr, vR = _mismatch(probes[:, :14], probes[:, 14:], p)

    best = [0.0, 0.0]
    for ch, vals in enumerate((vr, vR)):
        order = np.argsort(vals)[::-1]
        starts = probes[order[:n_starts]]
        z = starts.copy()
        span = hi - lo
        step0 = 0.08 * span
        fd = 1e-6 * np.maximum(span, 1e-9)
        step = np.tile(step0, (z.shape[0], 1))
        cur = _mismatch(z[:, :14], z[:, 14:], p)[ch]
        for _ in range(n_iter):
            grad = np.empty_like(z)
            for j in range(z.shape[1]):
                zp = z.copy()
                zp[:, j] += fd[j]
                zm = z.copy()
                zm[:, j] -= fd[j]
                grad[:, j] = (
                    _mismatch(zp[:, :14], zp[:, 14:], p)[ch]
                    - _mismatch(zm[:, :14], zm[:, 14:], p)[ch]
                ) / (2 * fd[j])
            gn = np.linalg.norm(grad, axis=1, keepdims=True)
            gn[gn == 0] = 1.0
            cand = np.clip(z + step * grad / gn, lo, hi)
            val = _mismatch(cand[:, :14], cand[:, 14:], p)[ch]
            improved = val > cur
            z[improved] = cand[improved]
            cur = np.maximum(cur, val)
            step[~improved] *= 0.5
            if float(step.max() / span.max()) < 1e-6:
                break
        best[ch] = float(cur.max())

    return inflation * best[0], inflation * best[1]
