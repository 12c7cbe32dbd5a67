"""Five-segment grasp-transport-release mission planner.

The mission visits waypoints A (start) -> B (plane entry) -> C (grasp point
above the payload) -> D (stop above the target) -> E (release height) -> F
(exit).  Each segment gets a clamped B-spline spatial path from a small
equality/inequality QP, a time allocation from the interior-point solver in
:mod:`hookquad.socp`, and a yaw polynomial.  Segments are solved in order so
that each one inherits the terminal velocity of its predecessor.

Planning happens in a payload-aligned frame: a yaw rotation plus translation
that puts the payload at the origin with the hook normal along +x, so the
approach plane is the local x-z plane.  Kinematic bounds are interpreted
per-axis in this frame.  Spline control points are mapped back to world
coordinates afterwards (B-splines are affine-invariant), and yaw is planned
directly in world heading angles.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .bspline import (
    SplinePath,
    arclength_surrogate_gram,
    basis_matrix,
    jerk_gram,
    uniform_clamped_knots,
)
from .errors import Infeasible
from .model import SystemParams
from .qp import solve_qp
from .socp import TimeProfile, solve_time_allocation

_DIR_TOL = 1e-3
_SPEED_EPS = 1e-9


@dataclass
class HyperParams:
    """Planner hyperparameters: kinematic bounds, tradeoffs, waypoint policy.

    ``v_max``, ``a_max`` and ``lambda_max`` may be scalars (applied to every
    axis) or length-3 arrays.  ``z_B_min``/``z_B_max`` default to the grasp
    height band [L, L + 0.3] and are resolved against the vehicle parameters
    when planning.
    """

    v_max: float | np.ndarray = 1.46
    a_max: float | np.ndarray = 0.2
    lambda_max: float | np.ndarray = 0.1
    w: float = 0.5
    rho: float = 0.1
    x_B: float = -0.3
    dx_B: float = 0.0
    z_B_min: float | None = None
    z_B_max: float | None = None
    dz_B_min: float = -0.5
    dz_B_max: float = 0.5
    z_D: float = 0.5
    K: int = 15
    n_coeffs: int = 12
    degree: int = 5
    lqr_duration: float = 2.0

    def __post_init__(self):
        for name in ("v_max", "a_max", "lambda_max"):
            val = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (3,))
            if name != "lambda_max" and np.any(val <= 0):
                raise ValueError(f"{name} must be positive")
            if name == "lambda_max" and np.any(val < 0):
                raise ValueError("lambda_max must be nonnegative")
        if not (0.0 <= self.w <= 1.0) or not (0.0 <= self.rho <= 1.0):
            raise ValueError("w and rho must lie in [0, 1]")
        if self.z_B_min is not None and self.z_B_max is not None and self.z_B_min > self.z_B_max:
            raise ValueError("z_B_min must not exceed z_B_max")
        if self.z_D <= 0 or self.K < 2 or self.lqr_duration < 0:
            raise ValueError("z_D must be positive, K >= 2, lqr_duration >= 0")
        if self.n_coeffs < self.degree + 1:
            raise ValueError("need at least degree+1 spline coefficients")

    def bounds(self):
        v = np.broadcast_to(np.asarray(self.v_max, dtype=float), (3,)).copy()
        a = np.broadcast_to(np.asarray(self.a_max, dtype=float), (3,)).copy()
        lam = np.broadcast_to(np.asarray(self.lambda_max, dtype=float), (3,)).copy()
        lam = np.where(lam > 0, lam, np.inf)
        return v, a, lam

    def z_band(self, L: float):
        lo = self.z_B_min if self.z_B_min is not None else L
        hi = self.z_B_max if self.z_B_max is not None else L + 0.3
        if lo > hi:
            raise ValueError("resolved z_B band is empty")
        return lo, hi

    def to_dict(self) -> dict:
        out = {}
        for name in self.__dataclass_fields__:
            val = getattr(self, name)
            if isinstance(val, np.ndarray):
                val = val.tolist()
            out[name] = val
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "HyperParams":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class MissionSpec:
    """Endpoint description of one grasp-transport-release mission."""

    r0: np.ndarray
    v0: np.ndarray
    r_L_init: np.ndarray
    n_hook: np.ndarray
    r_L_target: np.ndarray
    target_yaw: float
    r_F: np.ndarray
    psi0: float = 0.0
    hyper: HyperParams = field(default_factory=HyperParams)

    def __post_init__(self):
        for name in ("r0", "v0", "r_L_init", "n_hook", "r_L_target", "r_F"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float).reshape(3))
        n = self.n_hook
        if abs(np.linalg.norm(n) - 1.0) > 1e-6 or abs(n[2]) > 1e-9:
            raise ValueError("n_hook must be a horizontal unit vector")
        if np.linalg.norm(self.r_L_target - self.r_L_init) < 1e-9:
            raise ValueError("payload start and target must be distinct")

    def to_dict(self) -> dict:
        return {
            "r0": self.r0.tolist(),
            "v0": self.v0.tolist(),
            "r_L_init": self.r_L_init.tolist(),
            "n_hook": self.n_hook.tolist(),
            "r_L_target": self.r_L_target.tolist(),
            "target_yaw": float(self.target_yaw),
            "r_F": self.r_F.tolist(),
            "psi0": float(self.psi0),
            "hyper": self.hyper.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MissionSpec":
        kw = dict(data)
        if "hyper" in kw and isinstance(kw["hyper"], dict):
            kw["hyper"] = HyperParams.from_dict(kw["hyper"])
        known = {k: v for k, v in kw.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    @classmethod
    def from_json(cls, path: str) -> "MissionSpec":
        with open(path) as f:
            return cls.from_dict(json.load(f))


@dataclass
class FrameTransform:
    """Yaw rotation + translation between world and payload-aligned frame."""

    yaw: float
    origin: np.ndarray

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float).reshape(3)
        c, s = np.cos(self.yaw), np.sin(self.yaw)
        # world->frame rotation (rotate by -yaw about z)
        self._Rwf = np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])

    def to_frame(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.origin) @ self._Rwf.T

    def from_frame(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self._Rwf + self.origin

    def rotate_to_frame(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(v, dtype=float) @ self._Rwf.T

    def rotate_from_frame(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(v, dtype=float) @ self._Rwf


def payload_frame(spec: MissionSpec) -> FrameTransform:
    """Frame with the payload at the origin and the hook normal along +x."""
    yaw = float(np.arctan2(spec.n_hook[1], spec.n_hook[0]))
    return FrameTransform(yaw, spec.r_L_init.copy())


@dataclass
class SegmentBoundary:
    """Linear boundary conditions of one spatial segment.

    ``eq`` rows are (axis, deriv, s, value); ``lo``/``hi`` rows are
    (axis, deriv, s, bound) one-sided inequalities on the same functionals.
    """

    eq: list = field(default_factory=list)
    lo: list = field(default_factory=list)
    hi: list = field(default_factory=list)


def solve_spatial(segment_id: int, boundary: SegmentBoundary, hyper: HyperParams) -> SplinePath:
    """Optimize one segment's spline coefficients under boundary conditions.

    Minimizes ``w * jerk + (1 - w) * length-surrogate`` over the stacked
    per-axis coefficients; all boundary conditions are linear functionals of
    the spline, so this is a small dense QP.
    """
    n_c, degree = hyper.n_coeffs, hyper.degree
    knots = uniform_clamped_knots(degree, n_c)
    M = (
        hyper.w * jerk_gram(degree, knots).matrix
        + (1.0 - hyper.w) * arclength_surrogate_gram(degree, knots).matrix
    )
    P = np.kron(np.eye(3), M)
    q = np.zeros(3 * n_c)

    def row(axis, deriv, s):
        r = np.zeros(3 * n_c)
        r[axis * n_c : (axis + 1) * n_c] = basis_matrix(knots, degree, np.array([s]), deriv)[0]
        return r

    A = np.array([row(ax, d, s) for (ax, d, s, _v) in boundary.eq]) if boundary.eq else np.zeros((0, 3 * n_c))
    b = np.array([v for (*_r, v) in boundary.eq])if boundary.eq else np.zeros(0)
    G_rows, h_vals = [], []
    for ax, d, s, bound in boundary.lo:  # value >= bound
        G_rows.append(-row(ax, d, s))
        h_vals.append(-bound)
    for ax, d, s, bound in boundary.hi:  # value <= bound
        G_rows.append(row(ax, d, s))
        h_vals.append(bound)
    G = np.array(G_rows) if G_rows else None
    h = np.array(h_vals) if G_rows else None

    try:
        res = solve_qp(P, q, A, b, G, h)
    except Infeasible as err:
        raise Infeasible(f"segment {segment_id}: {err}") from err
    coeffs = res.x.reshape(3, n_c).T
    return SplinePath(degree, knots, coeffs)


def _boundary_speed(v: np.ndarray, tangent: np.ndarray, what: str) -> float:
    """Convert a boundary velocity vector to a squared progress rate."""
    speed = float(np.linalg.norm(v))
    if speed < _SPEED_EPS:
        return 0.0
    tnorm = float(np.linalg.norm(tangent))
    if tnorm < _SPEED_EPS:
        raise Infeasible(f"{what}: path tangent vanishes but boundary velocity is nonzero")
    if np.linalg.norm(v / speed - tangent / tnorm) > _DIR_TOL:
        raise Infeasible(f"{what}: boundary velocity direction incompatible with path tangent")
    return (speed / tnorm) ** 2


def solve_temporal(
    path: SplinePath,
    v0: np.ndarray,
    vf: np.ndarray | None,
    hyper: HyperParams,
    gap_tol: float = 1e-9,
    bK_max: float | None = None,
) -> TimeProfile:
    """Time allocation for one segment path.

    ``vf=None`` leaves the terminal speed free (used when the next segment
    will inherit whatever terminal velocity is optimal); ``bK_max`` can then
    cap the free terminal rate so the hand-off stays absorbable downstream.
    """
    K = hyper.K
    s_grid = np.linspace(0.0, 1.0, K + 1)
    D1 = path.eval(s_grid, 1)
    D2 = path.eval(s_grid, 2)
    v0 = np.zeros(3) if v0 is None else np.asarray(v0, dtype=float)
    b0 = _boundary_speed(v0, D1[0], "segment start")
    bK = None
    if vf is not None:
        bK = _boundary_speed(np.asarray(vf, dtype=float), D1[-1], "segment end")
    v_max, a_max, lam_max = hyper.bounds()
    return solve_time_allocation(
        D1, D2, hyper.rho, v_max, a_max, lam_max, b0, bK,
        gap_tol=gap_tol, bK_max=bK_max,
    )


def time_map(profile: TimeProfile, t: float):
    """(s, s_dot, s_ddot) at segment time t; see ``TimeProfile.s_of_t``."""
    return profile.s_of_t(t)


def quintic_coeffs(psi_start: float, psi_end: float, T: float) -> np.ndarray:
    """Degree-5 polynomial from psi_start to psi_end over [0, T].

    Boundary conditions: zero first and second derivative at both ends, which
    gives the smoothstep form ``10u^3 - 15u^4 + 6u^5`` in u = t/T.
    """
    if T <= 0:
        raise ValueError("duration must be positive")
    d = psi_end - psi_start
    return np.array([psi_start, 0.0, 0.0, 10.0 * d / T ** 3, -15.0 * d / T ** 4, 6.0 * d / T ** 5])


def plan_yaw(durations, psi0: float, psi_grasp: float, psi_final: float) -> list[np.ndarray]:
    """Yaw polynomials for the five segments.

    Segments 1 and 3 are quintics (A -> grasp heading, grasp -> final
    heading); segments 2, 4, 5 hold constant values, giving continuity at
    every joint.
    """
    T = [float(x) for x in durations]
    if len(T) != 5 or any(x <= 0 for x in T):
        raise ValueError("five positive segment durations required")
    const = lambda v: np.array([v, 0.0, 0.0, 0.0, 0.0, 0.0])
    return [
        quintic_coeffs(psi0, psi_grasp, T[0]),
        const(psi_grasp),
        quintic_coeffs(psi_grasp, psi_final, T[2]),
        const(psi_final),
        const(psi_final),
    ]


def eval_yaw(coeffs: np.ndarray, t) -> np.ndarray:
    return np.polyval(coeffs[::-1], t)


def eval_yaw_rate(coeffs: np.ndarray, t) -> np.ndarray:
    dcoef = coeffs[1:] * np.arange(1, len(coeffs))
    return np.polyval(dcoef[::-1], t)


@dataclass
class SegmentTrajectory:
    """One mission segment: world-frame spline, time profile, yaw polynomial."""

    path: SplinePath
    profile: TimeProfile
    yaw: np.ndarray
    start_velocity: np.ndarray
    end_velocity: np.ndarray

    @property
    def T(self) -> float:
        return self.profile.T

    def sample(self, t: float):
        """(r, v, a, psi) at segment-local time t."""
        s, sd, sdd = self.profile.s_of_t(t)
        r = self.path.eval(np.array([s]), 0)[0]
        D1 = self.path.eval(np.array([s]), 1)[0]
        D2 = self.path.eval(np.array([s]), 2)[0]
        v = D1 * sd
        a = D2 * sd * sd + D1 * sdd
        psi = float(eval_yaw(self.yaw, t))
        return r, v, a, psi

    def to_dict(self) -> dict:
        return {
            "path": self.path.to_dict(),
            "profile": self.profile.to_dict(),
            "yaw": self.yaw.tolist(),
            "start_velocity": self.start_velocity.tolist(),
            "end_velocity": self.end_velocity.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SegmentTrajectory":
        return cls(
            SplinePath.from_dict(data["path"]),
            TimeProfile.from_dict(data["profile"]),
            np.array(data["yaw"]),
            np.array(data["start_velocity"]),
            np.array(data["end_velocity"]),
        )


@dataclass
class MissionPlan:
    """Complete five-segment mission with the regulation hold at D.

    The timeline is segment 1, 2, 3, a fixed-duration hold window hovering at
    waypoint D (payload regulation), then segments 4 and 5.  The hook attach
    event is the joint between segments 2 and 3; release is the end of
    segment 4.
    """

    segments: list
    hold_duration: float
    frame: FrameTransform
    spec: MissionSpec

    @property
    def segment_times(self) -> np.ndarray:
        return np.array([seg.T for seg in self.segments])

    @property
    def flight_time(self) -> float:
        """Sum of the five segment durations (excludes the hold window)."""
        return float(np.sum(self.segment_times))

    @property
    def duration(self) -> float:
        return self.flight_time + self.hold_duration

    def boundaries(self) -> np.ndarray:
        """Start times of [seg1, seg2, seg3, hold, seg4, seg5, end]."""
        T = self.segment_times
        t0 = 0.0
        starts = [t0, T[0], T[0] + T[1], T[0] + T[1] + T[2]]
        starts.append(starts[3] + self.hold_duration)
        starts.append(starts[4] + T[3])
        starts.append(starts[5] + T[4])
        return np.array(starts)

    @property
    def attach_time(self) -> float:
        return float(self.segment_times[0] + self.segment_times[1])

    @property
    def release_time(self) -> float:
        b = self.boundaries()
        return float(b[5])

    @property
    def lqr_window(self) -> tuple[float, float]:
        b = self.boundaries()
        return float(b[3]), float(b[4])

    def reference(self, t: float):
        """(r_d, v_d, a_d, psi_d, segment) at mission time t.

        Segment labels are 1..5; the hold window is labeled 0.  Times beyond
        the end clamp to the terminal hover reference.

        Lookups are memoized by time quantized to a nanosecond: the control
        loop queries the same instants repeatedly (finite-difference stencils
        overlap tick to tick).  Plans are treated as immutable after
        construction; the returned arrays must not be modified in place.
        """
        cache = self.__dict__.setdefault("_ref_cache", {})
        key = int(round(t * 1e9))
        hit = cache.get(key)
        if hit is not None:
            return hit
        out = self._reference_uncached(t)
        if len(cache) > 400_000:
            cache.clear()
        cache[key] = out
        return out

    def _reference_uncached(self, t: float):
        b = self.__dict__.get("_b_cache")
        if b is None:
            b = self.boundaries()
            self.__dict__["_b_cache"] = b
        if t < -1e-9:
            raise ValueError("negative mission time")
        t = max(t, 0.0)
        if t >= b[6]:
            seg = self.segments[4]
            r, _v, _a, psi = seg.sample(seg.T)
            return r, np.zeros(3), np.zeros(3), psi, 5
        if b[3] <= t < b[4]:
            seg = self.segments[2]
            r, _v, _a, psi = seg.sample(seg.T)
            return r, np.zeros(3), np.zeros(3), psi, 0
        order = [(0, 0), (1, 1), (2, 2), (4, 3), (5, 4)]
        for slot, idx in order:
            if b[slot] <= t < b[slot + 1] or (slot == 5 and t <= b[6]):
                seg = self.segments[idx]
                tau = min(max(t - b[slot], 0.0), seg.T)
                r, v, a, psi = seg.sample(tau)
                return r, v, a, psi, idx + 1
        raise ValueError(f"time {t} not covered by mission timeline")

    def to_dict(self) -> dict:
        return {
            "segments": [s.to_dict() for s in self.segments],
            "hold_duration": self.hold_duration,
            "frame": {"yaw": self.frame.yaw, "origin": self.frame.origin.tolist()},
            "spec": self.spec.to_dict(),
            "events": {
                "attach_time": self.attach_time,
                "release_time": self.release_time,
                "lqr_window": list(self.lqr_window),
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MissionPlan":
        return cls(
            [SegmentTrajectory.from_dict(s) for s in data["segments"]],
            float(data["hold_duration"]),
            FrameTransform(data["frame"]["yaw"], np.array(data["frame"]["origin"])),
            MissionSpec.from_dict(data["spec"]),
        )

    def save_json(self, path: str):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def load_json(cls, path: str) -> "MissionPlan":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def write_csv(self, path: str, rate: float = 100.0):
        """Sampled reference at a fixed rate; hold rows carry segment 0."""
        ts = np.arange(0.0, self.duration + 0.5 / rate, 1.0 / rate)
        with open(path, "w") as f:
            f.write("t,x_d,y_d,z_d,vx_d,vy_d,vz_d,ax_d,ay_d,az_d,psi_d,segment\n")
            for t in ts:
                r, v, a, psi, seg = self.reference(min(t, self.duration))
                vals = [t, *r, *v, *a, psi]
                f.write(",".join(f"{x:.9g}" for x in vals) + f",{seg}\n")


def _segment_world(frame, path_f, profile, yaw_coeffs, v0_w, vf_w):
    coeffs_w = frame.from_frame(path_f.coeffs)
    return SegmentTrajectory(
        SplinePath(path_f.degree, path_f.knots.copy(), coeffs_w),
        profile,
        yaw_coeffs,
        np.asarray(v0_w, dtype=float),
        np.asarray(vf_w, dtype=float),
    )


def _pin_tangent(boundary, v, chord):
    """Constrain the initial tangent along a nonzero boundary velocity."""
    speed = float(np.linalg.norm(v))
    if speed < _SPEED_EPS:
        return
    tangent = v / speed * chord
    for ax in range(3):
        boundary.eq.append((ax, 1, 0.0, tangent[ax]))


def _handoff_cap(donor_path, receiver_path, a_max, lam_max, margin):
    """Cap on the donor's free terminal progress rate.

    The receiver inherits the hand-off speed as a fixed entry rate b0, and
    two of its constraint families cannot be traded away by the allocation:
    the centripetal acceleration perpendicular to the entry tangent (bounded
    by a_max), and the total variation the entry acceleration forces on the
    acceleration-rate rows (budget lam_max per unit of path parameter, of
    which at most half is granted to absorbing the entry).  The cap keeps
    both at ``margin`` of their budgets.
    """
    d1r = receiver_path.eval(np.array([0.0]), 1)[0]
    d2r = receiver_path.eval(np.array([0.0]), 2)[0]
    d1d = donor_path.eval(np.array([1.0]), 1)[0]
    nr = float(np.linalg.norm(d1r))
    nd = float(np.linalg.norm(d1d))
    if nr < _SPEED_EPS or nd < _SPEED_EPS:
        return None
    b0_cap = np.inf
    tangent = d1r / nr
    perp = d2r - (d2r @ tangent) * tangent
    pn = float(np.linalg.norm(perp))
    if pn > 1e-9:
        b0_cap = min(b0_cap, margin * float(np.min(a_max)) / pn)
    for ax in range(3):
        if np.isfinite(lam_max[ax]) and abs(d2r[ax]) > 1e-9:
            b0_cap = min(b0_cap, margin * 0.5 * float(lam_max[ax]) / abs(d2r[ax]))
    if not np.isfinite(b0_cap):
        return None
    return b0_cap * nr**2 / nd**2


def _validate_segment(seg_id, path_f, profile, hyper, samples=500):
    """Check sampled planning-frame kinematics against the true bounds."""
    v_max, a_max, _ = hyper.bounds()
    ts = np.linspace(0.0, profile.T, samples)
    svals = np.empty((samples, 3))
    for i, t in enumerate(ts):
        svals[i] = profile.s_of_t(t)
    s, sd, sdd = svals.T
    D1 = path_f.eval(s, 1)
    D2 = path_f.eval(s, 2)
    v = D1 * sd[:, None]
    a = D2 * (sd ** 2)[:, None] + D1 * sdd[:, None]
    v_ok = np.all(np.abs(v) <= v_max + 1e-6)
    a_ok = np.all(np.abs(a) <= a_max + 1e-6)
    return bool(v_ok and a_ok)


def plan_mission(
    spec: MissionSpec,
    params: SystemParams | None = None,
    timings: dict | None = None,
) -> MissionPlan:
    """Plan the full five-segment mission for one specification.

    Solves the five spatial QPs and time allocations in order, chaining
    terminal velocities, then lays the yaw polynomials over the segment
    durations and validates continuity and sampled kinematic bounds.

    When a dict is passed as ``timings`` it is filled with per-segment
    solver wall times in milliseconds under the keys ``qp_ms`` and
    ``socp_ms`` (the latter accumulated over retry attempts).
    """
    params = params if params is not None else SystemParams()
    hyper = spec.hyper
    frame = payload_frame(spec)
    L, d_h = params.L, params.d_h

    A = frame.to_frame(spec.r0)
    vA = frame.rotate_to_frame(spec.v0)
    C = np.array([0.0, 0.0, L])
    target_f = frame.to_frame(spec.r_L_target)
    D = target_f + np.array([0.0, 0.0, hyper.z_D])
    E = target_f + np.array([0.0, 0.0, L - 0.5 * d_h])
    F = frame.to_frame(spec.r_F)
    z_lo, z_hi = hyper.z_band(L)

    # temporal bounds get a small backoff so that mid-interval kinematics
    # stay within the true bounds at the post-hoc sampling check; hand-off
    # caps shrink along the same ladder
    backoffs = [(0.995, 0.97, 0.7), (0.98, 0.9, 0.5), (0.95, 0.8, 0.3)]

    def spatial(seg_id, bnd):
        t0 = time.perf_counter()
        path = solve_spatial(seg_id, bnd, hyper)
        if timings is not None:
            timings.setdefault("qp_ms", {})[seg_id] = (time.perf_counter() - t0) * 1e3
        return path

    def temporal_with_backoff(seg_id, path_f, v0_f, vf_f, receiver=None):
        last_err = None
        spent = 0.0
        for bv, ba, margin in backoffs:
            v_max, a_max, lam = hyper.bounds()
            hy = replace(hyper, v_max=v_max * bv, a_max=a_max * ba, lambda_max=lam)
            cap = None
            if receiver is not None:
                cap = _handoff_cap(path_f, receiver, a_max * ba, lam, margin)
            try:
                t0 = time.perf_counter()
                profile = solve_temporal(path_f, v0_f, vf_f, hy, bK_max=cap)
                spent += time.perf_counter() - t0
            except Infeasible as err:
                spent += time.perf_counter() - t0
                last_err = Infeasible(f"segment {seg_id}: {err}")
                continue
            if timings is not None:
                timings.setdefault("socp_ms", {})[seg_id] = spent * 1e3
            if _validate_segment(seg_id, path_f, profile, hyper):
                return profile
            last_err = Infeasible(
                f"segment {seg_id}: sampled kinematics exceed bounds at every backoff"
            )
        raise last_err

    def end_velocity(path_f, profile):
        D1 = path_f.eval(np.array([1.0]), 1)[0]
        return D1 * np.sqrt(max(profile.b[-1], 0.0))

    segments_f = []

    # Spatial problems for segments 1-3 are built first: the hand-off caps
    # need each receiver's entry geometry before the donor's time allocation
    # is fixed, and only the terminal tangent *direction* (known spatially)
    # enters the next segment's constraint set.

    # --- segment 1: A -> B (plane entry) ---
    bnd = SegmentBoundary()
    for ax in range(3):
        bnd.eq.append((ax, 0, 0.0, A[ax]))
    chord1 = np.linalg.norm(np.array([hyper.x_B, 0.0, np.clip(A[2], z_lo, z_hi)]) - A)
    _pin_tangent(bnd, vA, max(chord1, 0.1))
    bnd.eq += [(1, 0, 1.0, 0.0), (1, 1, 1.0, 0.0), (1, 2, 1.0, 0.0), (0, 0, 1.0, hyper.x_B)]
    bnd.lo += [(0, 1, 1.0, hyper.dx_B), (2, 0, 1.0, z_lo), (2, 1, 1.0, hyper.dz_B_min)]
    bnd.hi += [(2, 0, 1.0, z_hi), (2, 1, 1.0, hyper.dz_B_max)]
    path1 = spatial(1, bnd)

    # --- segment 2: B -> C (grasp approach) ---
    B = path1.eval(np.array([1.0]), 0)[0]
    dirB = path1.eval(np.array([1.0]), 1)[0]
    bnd = SegmentBoundary()
    for ax in range(3):
        bnd.eq.append((ax, 0, 0.0, B[ax]))
    _pin_tangent(bnd, dirB, max(np.linalg.norm(C - B), 0.1))
    for ax in range(3):
        bnd.eq.append((ax, 0, 1.0, C[ax]))
    bnd.eq += [(1, 1, 1.0, 0.0), (2, 1, 1.0, 0.0)]
    bnd.lo += [(0, 1, 1.0, 0.0)]
    path2 = spatial(2, bnd)

    # --- segment 3: C -> D (transport, stop above target) ---
    dirC = path2.eval(np.array([1.0]), 1)[0]
    bnd = SegmentBoundary()
    for ax in range(3):
        bnd.eq.append((ax, 0, 0.0, C[ax]))
    _pin_tangent(bnd, dirC, max(np.linalg.norm(D - C), 0.1))
    for ax in range(3):
        bnd.eq.append((ax, 0, 1.0, D[ax]))
    bnd.eq += [(0, 1, 1.0, 0.0), (1, 1, 1.0, 0.0), (0, 2, 1.0, 0.0), (1, 2, 1.0, 0.0)]
    path3 = spatial(3, bnd)

    # --- time allocations, chaining terminal velocities ---
    prof1 = temporal_with_backoff(1, path1, vA, None, receiver=path2)
    vB = end_velocity(path1, prof1)
    segments_f.append((path1, prof1, vA, vB))

    prof2 = temporal_with_backoff(2, path2, vB, None, receiver=path3)
    vC = end_velocity(path2, prof2)
    segments_f.append((path2, prof2, vB, vC))

    prof3 = temporal_with_backoff(3, path3, vC, np.zeros(3))
    segments_f.append((path3, prof3, vC, np.zeros(3)))

    # --- segment 4: D -> E (descend to release height) ---
    bnd = SegmentBoundary()
    for ax in range(3):
        bnd.eq.append((ax, 0, 0.0, D[ax]))
    for ax in range(3):
        bnd.eq.append((ax, 0, 1.0, E[ax]))
    path4 = spatial(4, bnd)
    prof4 = temporal_with_backoff(4, path4, np.zeros(3), np.zeros(3))
    segments_f.append((path4, prof4, np.zeros(3), np.zeros(3)))

    # --- segment 5: E -> F (horizontal exit) ---
    bnd = SegmentBoundary()
    for ax in range(3):
        bnd.eq.append((ax, 0, 0.0, E[ax]))
    bnd.eq += [(2, 1, 0.0, 0.0), (2, 2, 0.0, 0.0)]
    for ax in range(3):
        bnd.eq.append((ax, 0, 1.0, F[ax]))
    path5 = spatial(5, bnd)
    prof5 = temporal_with_backoff(5, path5, np.zeros(3), np.zeros(3))
    segments_f.append((path5, prof5, np.zeros(3), np.zeros(3)))

    durations = [p.T for (_pa, p, _v, _w) in segments_f]
    psi_grasp = frame.yaw
    yaws = plan_yaw(durations, spec.psi0, psi_grasp, spec.target_yaw)

    segments = []
    for (path_f, profile, v0_f, vf_f), yaw_c in zip(segments_f, yaws):
        segments.append(
            _segment_world(
                frame, path_f, profile, yaw_c,
                frame.rotate_from_frame(v0_f), frame.rotate_from_frame(vf_f),
            )
        )

    plan = MissionPlan(segments, hyper.lqr_duration, frame, spec)
    _check_continuity(plan)
    return plan


def _check_continuity(plan: MissionPlan):
    """Position/velocity joint checks; at E only position must match."""
    segs = plan.segments
    for i in range(4):
        r_end, v_end, _a, _psi = segs[i].sample(segs[i].T)
        r_next, v_next, _a2, _p2 = segs[i + 1].sample(0.0)
        if np.linalg.norm(r_end - r_next) > 1e-6:
            raise Infeasible(f"position discontinuity at joint {i + 1}")
        if i != 3 and np.linalg.norm(v_end - v_next) > 1e-6:
            raise Infeasible(f"velocity discontinuity at joint {i + 1}")
