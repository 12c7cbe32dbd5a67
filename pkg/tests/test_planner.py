"""Mission planner: frames, waypoints, continuity, yaw, serialization.

The five-segment plan must hit the geometric waypoints (grasp point above
the payload, release height over the target), stay continuous in position
and velocity at the joints, and lay exact quintic yaw transitions over the
segment durations.
"""

import numpy as np
import numpy.testing as npt
import pytest

from hookquad.errors import Infeasible
from hookquad.model import SystemParams
from hookquad.planner import (
    HyperParams,
    MissionPlan,
    MissionSpec,
    eval_yaw,
    eval_yaw_rate,
    payload_frame,
    plan_mission,
    plan_yaw,
    quintic_coeffs,
)

from conftest import short_mission


# ---------------------------------------------------------------------------
# payload-aligned frame
# ---------------------------------------------------------------------------

def test_frame_yaw_follows_hook_normal(nominal_spec):
    frame = payload_frame(nominal_spec)
    npt.assert_allclose(frame.yaw, 0.0, atol=0)  # +x approach
    spec = MissionSpec(
        r0=np.array([0.0, -1.5, 1.0]),
        v0=np.zeros(3),
        r_L_init=np.zeros(3),
        n_hook=np.array([0.0, 1.0, 0.0]),
        r_L_target=np.array([0.0, 2.0, 0.0]),
        target_yaw=0.0,
        r_F=np.array([0.5, 3.0, 1.0]),
    )
    npt.assert_allclose(payload_frame(spec).yaw, np.pi / 2, atol=1e-12)
    # the start point maps to -x (hook approach comes from -x in frame)
    A = payload_frame(spec).to_frame(spec.r0)
    npt.assert_allclose(A, [-1.5, 0.0, 1.0], atol=1e-12)


def test_frame_roundtrip():
    spec = short_mission()
    frame = payload_frame(spec)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(3)
    npt.assert_allclose(frame.from_frame(frame.to_frame(x)), x, atol=1e-14)
    v = rng.standard_normal(3)
    npt.assert_allclose(frame.rotate_from_frame(frame.rotate_to_frame(v)), v, atol=1e-14)


def test_spec_validation():
    with pytest.raises(ValueError):
        MissionSpec(
            r0=np.zeros(3), v0=np.zeros(3), r_L_init=np.zeros(3),
            n_hook=np.array([0.0, 0.0, 1.0]),  # not horizontal
            r_L_target=np.array([1.0, 0, 0]), target_yaw=0.0, r_F=np.ones(3),
        )
    with pytest.raises(ValueError):
        MissionSpec(
            r0=np.zeros(3), v0=np.zeros(3), r_L_init=np.zeros(3),
            n_hook=np.array([1.0, 0.0, 0.0]),
            r_L_target=np.zeros(3),  # degenerate transport
            target_yaw=0.0, r_F=np.ones(3),
        )


# ---------------------------------------------------------------------------
# planned geometry
# ---------------------------------------------------------------------------

def test_plan_hits_mission_waypoints(nominal_spec, nominal_plan):
    p = SystemParams()
    hyper = nominal_spec.hyper
    b = nominal_plan.boundaries()

    r, v, _a, psi, seg = nominal_plan.reference(0.0)
    npt.assert_allclose(r, nominal_spec.r0, atol=1e-8)
    npt.assert_allclose(v, nominal_spec.v0, atol=1e-8)
    assert seg == 1

    # grasp: hook pole length above the payload, at rest horizontally is not
    # required, but position must match exactly
    r, _v, _a, _psi, seg = nominal_plan.reference(nominal_plan.attach_time - 1e-9)
    npt.assert_allclose(r, nominal_spec.r_L_init + [0, 0, p.L], atol=1e-6)

    # hold window hovers at the cruise end: z_D above the target
    r, v, a, _psi, seg = nominal_plan.reference(0.5 * (b[3] + b[4]))
    assert seg == 0
    npt.assert_allclose(r, nominal_spec.r_L_target + [0, 0, hyper.z_D], atol=1e-6)
    npt.assert_allclose(v, np.zeros(3), atol=1e-9)
    npt.assert_allclose(a, np.zeros(3), atol=1e-9)

    # release: the hook opening must slip off half its diameter above resting
    r, _v, _a, _psi, seg = nominal_plan.reference(nominal_plan.release_time - 1e-9)
    npt.assert_allclose(r, nominal_spec.r_L_target + [0, 0, p.L - 0.5 * p.d_h], atol=1e-6)

    # final point
    r, v, _a, psi, seg = nominal_plan.reference(nominal_plan.duration)
    npt.assert_allclose(r, nominal_spec.r_F, atol=1e-6)
    npt.assert_allclose(v, np.zeros(3), atol=1e-12)
    npt.assert_allclose(psi, nominal_spec.target_yaw, atol=1e-9)
    assert seg == 5


def test_reference_continuity_at_joints(nominal_plan):
    h = 1e-7
    for tb in nominal_plan.boundaries()[1:6]:
        r0, v0, _a, psi0, _s = nominal_plan.reference(tb - h)
        r1, v1, _a, psi1, _s = nominal_plan.reference(tb + h)
        npt.assert_allclose(r0, r1, atol=1e-6)
        npt.assert_allclose(v0, v1, atol=1e-5)
        npt.assert_allclose(psi0, psi1, atol=1e-6)


def test_segment_labels_cover_timeline(nominal_plan):
    b = nominal_plan.boundaries()
    expect = [1, 2, 3, 0, 4, 5]
    for i, lab in enumerate(expect):
        t_mid = 0.5 * (b[i] + b[i + 1])
        assert nominal_plan.reference(t_mid)[4] == lab
    # clamped beyond the end
    assert nominal_plan.reference(nominal_plan.duration + 5.0)[4] == 5


def test_sampled_kinematics_respect_bounds(nominal_plan, nominal_spec):
    hyper = nominal_spec.hyper
    ts = np.linspace(0.0, nominal_plan.duration, 2000)
    vmax = amax = 0.0
    for t in ts:
        _r, v, a, _psi, _s = nominal_plan.reference(t)
        vmax = max(vmax, float(np.max(np.abs(v))))
        amax = max(amax, float(np.max(np.abs(a))))
    assert vmax <= hyper.v_max * (1 + 1e-6)
    assert amax <= hyper.a_max * (1 + 1e-6)


def test_infeasible_start_speed_raises(nominal_spec):
    from dataclasses import replace

    hyper = replace(nominal_spec.hyper, v_max=0.8)
    spec = replace(nominal_spec, v0=np.array([2.5, 0.0, 0.0]), hyper=hyper)
    with pytest.raises(Infeasible):
        plan_mission(spec)


def test_timings_are_recorded(nominal_spec):
    timings = {}
    plan_mission(nominal_spec, timings=timings)
    assert sorted(timings["qp_ms"]) == [1, 2, 3, 4, 5]
    assert sorted(timings["socp_ms"]) == [1, 2, 3, 4, 5]
    assert all(v > 0 for v in timings["qp_ms"].values())
    assert all(v > 0 for v in timings["socp_ms"].values())


# ---------------------------------------------------------------------------
# yaw quintics
# ---------------------------------------------------------------------------

def test_quintic_boundary_conditions():
    T = 3.7
    c = quintic_coeffs(0.4, -1.1, T)
    for t, val in ((0.0, 0.4), (T, -1.1)):
        npt.assert_allclose(eval_yaw(c, t), val, atol=1e-10)
        npt.assert_allclose(eval_yaw_rate(c, t), 0.0, atol=1e-9)
    # second derivative vanishes at the ends (smoothstep)
    d2 = np.polyder(np.poly1d(c[::-1]), 2)
    npt.assert_allclose(d2(0.0), 0.0, atol=1e-10)
    npt.assert_allclose(d2(T), 0.0, atol=1e-10)


def test_quintic_midpoint_symmetry():
    T = 2.4
    c = quintic_coeffs(0.2, 1.0, T)
    npt.assert_allclose(eval_yaw(c, T / 2), 0.6, atol=1e-10)
    # odd symmetry about the midpoint
    for dt in (0.1, 0.5, 1.0):
        lo = eval_yaw(c, T / 2 - dt) - 0.6
        hi = eval_yaw(c, T / 2 + dt) - 0.6
        npt.assert_allclose(lo, -hi, atol=1e-10)


def test_yaw_plan_is_continuous_and_hits_headings():
    durations = [2.0, 1.5, 4.0, 1.0, 2.5]
    ys = plan_yaw(durations, 0.3, -0.8, 1.2)
    npt.assert_allclose(eval_yaw(ys[0], 0.0), 0.3, atol=1e-12)
    npt.assert_allclose(eval_yaw(ys[0], durations[0]), -0.8, atol=1e-10)
    npt.assert_allclose(eval_yaw(ys[1], 0.7), -0.8, atol=1e-12)
    npt.assert_allclose(eval_yaw(ys[2], durations[2]), 1.2, atol=1e-10)
    npt.assert_allclose(eval_yaw(ys[4], 1.3), 1.2, atol=1e-12)


# ---------------------------------------------------------------------------
# serialization and memoization
# ---------------------------------------------------------------------------

def test_plan_json_roundtrip(tmp_path, short_plan):
    path = tmp_path / "plan.json"
    short_plan.save_json(path)
    back = MissionPlan.load_json(path)
    npt.assert_allclose(back.duration, short_plan.duration, atol=0)
    for t in np.linspace(0.0, short_plan.duration, 40):
        r0, v0, a0, p0, s0 = short_plan.reference(t)
        r1, v1, a1, p1, s1 = back.reference(t)
        npt.assert_array_equal(r0, r1)
        npt.assert_array_equal(v0, v1)
        npt.assert_array_equal(a0, a1)
        assert p0 == p1 and s0 == s1


def test_reference_memoization_is_transparent(short_plan):
    t = 0.37 * short_plan.duration
    first = short_plan.reference(t)
    again = short_plan.reference(t)
    assert again is first  # cache hit returns the same tuple
    fresh = short_plan._reference_uncached(t)
    npt.assert_array_equal(first[0], fresh[0])
    npt.assert_array_equal(first[1], fresh[1])
