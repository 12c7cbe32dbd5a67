"""Closed-loop mission simulation with hook attach/release events.

Fixed-step RK4 integration of the 7-DoF vehicle under the scheduled
controller, zero-order-hold control between ticks, proximity-tested payload
pickup at the grasp waypoint, and payload release at the start of the
retreat segment.  Produces a uniformly sampled trace plus summary metrics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .control import GeomGains, LqrGain, control_mode, scheduled_control
from .errors import Diverged, GraspFailed, NumericalBlowup
from .model import (
    E3,
    ControlInput,
    FullState,
    SystemParams,
    hook_tip_position,
    state_derivative,
)
from .planner import MissionPlan, MissionSpec

__all__ = ["SimConfig", "SimTrace", "step", "run_mission", "metrics"]

#: State-norm guard beyond which integration aborts.
BLOWUP_NORM = 1e6
#: Position error (m) beyond which a mission run is declared lost.
DIVERGENCE_ERROR = 10.0


@dataclass
class SimConfig:
    """Integration and event settings for closed-loop runs.

    ``control_dt`` must be an integer multiple of the integration step
    ``dt``.  ``duration`` caps the simulated time (``None`` runs the full
    plan).  ``noise_sigma`` adds Gaussian measurement noise (std-dev, applied
    to the state seen by the controller only; default off).
    """

    dt: float = 1e-3
    control_dt: float = 2e-3
    duration: float | None = None
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.dt <= 0 or self.control_dt < self.dt:
            raise ValueError("need 0 < dt <= control_dt")
        ratio = self.control_dt / self.dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("control_dt must be an integer multiple of dt")
        if self.duration is not None and self.duration <= 0:
            raise ValueError("duration cap must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")

    @property
    def substeps(self) -> int:
        return int(round(self.control_dt / self.dt))


@dataclass
class SimTrace:
    """Uniformly sampled closed-loop run at the controller period.

    Rows hold the state (14-vector), applied input, controller mode,
    payload and hook-tip positions, and the attachment flag.  ``events``
    maps event names (attach, release, lqr_on, lqr_off) to timestamps.
    """

    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    mode: np.ndarray
    payload: np.ndarray
    tip: np.ndarray
    attached: np.ndarray
    events: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.t.shape[0]
        shapes = {
            "x": (n, 14), "u": (n, 4), "mode": (n,),
            "payload": (n, 3), "tip": (n, 3), "attached": (n,),
        }
        for name, shape in shapes.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} must have shape {shape}")
        if n > 1 and not np.all(np.diff(self.t) > 0):
            raise ValueError("trace times must be strictly increasing")

    def state_at(self, i: int) -> FullState:
        return FullState.from_vector(self.x[i])

    def write_csv(self, path: str):
        header = (
            "t,x,y,z,phi,theta,psi,alpha,vx,vy,vz,dphi,dtheta,dpsi,dalpha,"
            "F,taux,tauy,tauz,mode,mL_attached"
        )
        rows = np.column_stack([
            self.t, self.x, self.u, self.mode.astype(float),
            self.attached.astype(float),
        ])
        np.savetxt(path, rows, delimiter=",", header=header, comments="",
                   fmt="%.10g")


def _rk4(x: np.ndarray, u: np.ndarray, p: SystemParams, dt: float) -> np.ndarray:
    k1 = state_derivative(x, u, p)
    k2 = state_derivative(x + 0.5 * dt * k1, u, p)
    k3 = state_derivative(x + 0.5 * dt * k2, u, p)
    k4 = state_derivative(x + dt * k3, u, p)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step(state: FullState, u: ControlInput, p: SystemParams, dt: float) -> FullState:
    """One classic fourth-order Runge-Kutta step of the 7-DoF dynamics.

    Raises :class:`NumericalBlowup` when the state norm exceeds 1e6; pitch
    singularities propagate from the dynamics evaluation.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = _rk4(state.as_vector(), u.as_vector(), p, dt)
    if not np.all(np.isfinite(x)) or np.linalg.norm(x) > BLOWUP_NORM:
        raise NumericalBlowup(f"state norm {np.linalg.norm(x):.3e} after step")
    return FullState.from_vector(x)


def _check_plan_matches(spec: MissionSpec, plan: MissionPlan):
    # The payload's actual initial position is deliberately NOT compared:
    # a payload sitting away from the planned grasp point is a legitimate
    # scenario that the grasp proximity test must catch at attach time.
    ps = plan.spec
    pairs = [
        (spec.r0, ps.r0), (spec.v0, ps.v0),
        (spec.r_L_target, ps.r_L_target), (spec.r_F, ps.r_F),
    ]
    if not all(np.allclose(a, b, atol=1e-9) for a, b in pairs):
        raise ValueError("plan was built for a different mission")


def run_mission(
    spec: MissionSpec,
    plan: MissionPlan,
    cfg: SimConfig,
    p: SystemParams,
    gains: GeomGains | None = None,
    lqr: LqrGain | None = None,
) -> SimTrace:
    """Simulate the full grasp-transport-release mission.

    The vehicle starts at the mission start point with the planned initial
    yaw and a hanging hook.  At the end of the grasp segment the hook tip
    must lie within half the hook-opening diameter of the payload, otherwise
    :class:`GraspFailed` is raised; on success the payload mass couples
    instantly (swing angle and rate are continuous).  The payload is released
    at the start of the retreat segment and stays where it was set down.

    Parameters
    ----------
    spec, plan : MissionSpec, MissionPlan
        Mission description and its planned trajectory.
    cfg : SimConfig
    p : SystemParams
        ``p.m_L`` is the mass of the payload to pick up; the unloaded phases
        use the same parameters with the payload mass zeroed.
    gains : GeomGains, optional
        Geometric-controller gains (defaults).
    lqr : LqrGain, optional
        Regulator for the hold window; designed on demand for ``p`` if not
        supplied.

    Returns
    -------
    SimTrace
    """
    from .control import lqr_design  # deferred: only needed when not supplied

    _check_plan_matches(spec, plan)
    if gains is None:
        gains = GeomGains()
    if lqr is None:
        lqr = lqr_design(p)
    p_loaded = p
    p_free = p.with_payload(0.0)

    T_end = plan.duration if cfg.duration is None else min(cfg.duration, plan.duration)
    t_attach = plan.attach_time
    t_release = plan.release_time
    lqr_on, lqr_off = plan.lqr_window

    n_ticks = int(np.floor(T_end / cfg.control_dt + 1e-9)) + 1
    tr_t = np.arange(n_ticks) * cfg.control_dt
    tr_x = np.zeros((n_ticks, 14))
    tr_u = np.zeros((n_ticks, 4))
    tr_mode = np.zeros(n_ticks, dtype=int)
    tr_payload = np.zeros((n_ticks, 3))
    tr_tip = np.zeros((n_ticks, 3))
    tr_att = np.zeros(n_ticks, dtype=bool)
    events: dict = {}

    psi0 = plan.reference(0.0)[3]
    xi = np.concatenate([spec.r0, [0.0, 0.0, psi0, 0.0]])
    xi_dot = np.concatenate([spec.v0, np.zeros(4)])
    x = np.concatenate([xi, xi_dot])

    rng = np.random.default_rng(cfg.seed)
    attached = False
    payload_pos = np.asarray(spec.r_L_init, dtype=float).copy()
    # payload hangs with its hook hole half an opening above the tip
    hole_offset = 0.5 * p.d_h * E3

    def current_p():
        return p_loaded if attached else p_free

    def tip_of(xv: np.ndarray) -> np.ndarray:
        return hook_tip_position(FullState.from_vector(xv), p)

    def handle_attach(xv: np.ndarray):
        nonlocal attached, payload_pos
        tip = tip_of(xv)
        miss = float(np.linalg.norm(tip - np.asarray(spec.r_L_init, dtype=float)))
        if miss > 0.5 * p.d_h:
            raise GraspFailed(
                f"hook tip missed the payload by {miss * 100:.2f} cm "
                f"(allowed {0.5 * p.d_h * 100:.2f} cm)",
                distance=miss,
                time=t_attach,
            )
        attached = True
        events["attach"] = t_attach
        events["grasp_miss"] = miss

    def handle_release(xv: np.ndarray):
        nonlocal attached, payload_pos
        payload_pos = tip_of(xv) + hole_offset
        attached = False
        events["release"] = t_release

    pending = [(t_attach, handle_attach), (t_release, handle_release)]
    pending = [(te, fn) for te, fn in pending if te <= T_end + 1e-9]
    events["lqr_on"], events["lqr_off"] = lqr_on, lqr_off

    u_vec = np.zeros(4)
    for k in range(n_ticks):
        t_k = tr_t[k]
        state = FullState.from_vector(x)
        x_meas = x
        if cfg.noise_sigma > 0.0:
            x_meas = x + rng.normal(scale=cfg.noise_sigma, size=14)
        u = scheduled_control(
            t_k, FullState.from_vector(x_meas), plan, gains, lqr, current_p()
        )
        u_vec = u.as_vector()

        tr_x[k] = x
        tr_u[k] = u_vec
        tr_mode[k] = control_mode(t_k, plan)
        tip = tip_of(x)
        tr_tip[k] = tip
        tr_payload[k] = tip + hole_offset if attached else payload_pos
        tr_att[k] = attached

        err = np.linalg.norm(state.r - plan.reference(t_k)[0])
        if err > DIVERGENCE_ERROR:
            raise Diverged(f"position error {err:.2f} m at t = {t_k:.2f} s")

        if k == n_ticks - 1:
            break
        # integrate to the next tick, splitting at event times exactly
        tc = t_k
        t_next = tr_t[k + 1]
        while tc < t_next - 1e-12:
            t_stop = t_next
            fire = None
            if pending and pending[0][0] < t_stop - 1e-12:
                t_stop, fire = pending[0]
                t_stop = max(t_stop, tc)
            while tc < t_stop - 1e-12:
                h = min(cfg.dt, t_stop - tc)
                x = _rk4(x, u_vec, current_p(), h)
                tc += h
                if not np.all(np.isfinite(x)) or np.linalg.norm(x) > BLOWUP_NORM:
                    raise NumericalBlowup(f"state norm blew up at t = {tc:.3f} s")
            if fire is not None:
                fire(x)
                pending.pop(0)

    return SimTrace(tr_t, tr_x, tr_u, tr_mode, tr_payload, tr_tip, tr_att, events)


def metrics(trace: SimTrace, plan: MissionPlan) -> dict:
    """Tracking and payload summary statistics of a mission run.

    Returns a JSON-ready dict with the position-tracking RMSE and peak error
    (m), the final payload distance from its drop-off target (m), the largest
    swing magnitude (rad), per-segment durations, and the grasp miss distance
    when an attach event was recorded.
    """
    refs = np.array([plan.reference(t)[0] for t in trace.t])
    err = np.linalg.norm(trace.x[:, 0:3] - refs, axis=1)
    rmse = float(np.sqrt(np.mean(err**2)))
    peak = float(np.max(err))
    final_payload = float(
        np.linalg.norm(trace.payload[-1] - plan.spec.r_L_target)
    )
    out = {
        "rmse": rmse,
        "peak_error": peak,
        "final_payload_error": final_payload,
        "max_swing": float(np.max(np.abs(trace.x[:, 6]))),
        "segment_durations": [float(s) for s in plan.segment_times],
        "flight_time": float(plan.flight_time),
        "duration": float(plan.duration),
    }
    if "grasp_miss" in trace.events:
        out["grasp_miss"] = float(trace.events["grasp_miss"])
    return out


def write_metrics_json(report: dict, path: str):
    with open(path, "w") as f:
        json.dump(report, f, indent=2)
