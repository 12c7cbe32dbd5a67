"""Closed-loop simulator: integration accuracy, events, and failure guards.

One full short mission is simulated once and shared across the trace-level
checks (events, metrics, attach continuity, mode logging).  Integration
order is measured on a vigorously tumbling state so the error sits well
above the roundoff floor.
"""

import numpy as np
import numpy.testing as npt
import pytest

from hookquad.control import GeomGains
from hookquad.errors import Diverged, GraspFailed
from hookquad.model import (
    ControlInput,
    FullState,
    SystemParams,
    hover_input,
    hover_state,
    state_derivative,
)
from hookquad.sim import SimConfig, SimTrace, metrics, run_mission, step


@pytest.fixture(scope="module")
def short_trace(short_spec, short_plan, loaded):
    return run_mission(short_spec, short_plan, SimConfig(), loaded)


# ---------------------------------------------------------------------------
# integrator
# ---------------------------------------------------------------------------

def test_equilibrium_is_a_fixed_point(loaded):
    st = hover_state(loaded)
    u = ControlInput(hover_input(loaded)[0], np.zeros(3))
    out = step(st, u, loaded, 0.01)
    npt.assert_allclose(out.as_vector(), st.as_vector(), atol=1e-12)


def test_integration_is_fourth_order(loaded):
    # tumbling state with ~1 rad/s rates: step-halving errors must shrink
    # by ~16x, i.e. a log2 slope of ~4 (3.8 allows integrator-level noise)
    x0 = FullState(
        np.array([0.0, 0.0, 1.0, 0.3, -0.25, 0.4, 0.9]),
        np.array([0.5, -0.4, 0.3, 1.2, -1.0, 0.8, 2.0]),
    ).as_vector()
    u = np.zeros(4)
    T = 1.0

    def integrate(dt):
        x = x0.copy()
        st = FullState.from_vector(x)
        n = int(round(T / dt))
        for _ in range(n):
            st = step(st, ControlInput(u[0], u[1:]), loaded, dt)
        return st.as_vector()

    ref = integrate(2e-4)
    errs = [np.linalg.norm(integrate(dt) - ref) for dt in (8e-3, 4e-3, 2e-3)]
    slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(slopes >= 3.8), f"observed convergence slopes {slopes}"


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(dt=2e-3, control_dt=1e-3)  # control slower than dynamics
    with pytest.raises(ValueError):
        SimConfig(dt=3e-4, control_dt=1e-3)  # not an integer multiple
    with pytest.raises(ValueError):
        SimConfig(noise_sigma=-0.1)
    assert SimConfig(dt=5e-4, control_dt=2e-3).substeps == 4


# ---------------------------------------------------------------------------
# full-mission trace
# ---------------------------------------------------------------------------

def test_trace_events_and_schema(short_trace, short_plan):
    for name in ("attach", "release", "lqr_on", "lqr_off", "grasp_miss"):
        assert name in short_trace.events
    npt.assert_allclose(short_trace.events["attach"], short_plan.attach_time, atol=1e-9)
    npt.assert_allclose(short_trace.events["release"], short_plan.release_time, atol=1e-9)
    lqr_on, lqr_off = short_plan.lqr_window
    npt.assert_allclose(short_trace.events["lqr_on"], lqr_on, atol=1e-9)
    npt.assert_allclose(short_trace.events["lqr_off"], lqr_off, atol=1e-9)
    n = short_trace.t.shape[0]
    assert short_trace.x.shape == (n, 14)
    assert short_trace.u.shape == (n, 4)


def test_attachment_flag_and_mode_log(short_trace, short_plan):
    t = short_trace.t
    in_carry = (t > short_plan.attach_time + 1e-6) & (t < short_plan.release_time - 1e-6)
    assert np.all(short_trace.attached[in_carry])
    assert not short_trace.attached[0]
    assert not short_trace.attached[-1]
    lqr_on, lqr_off = short_plan.lqr_window
    in_hold = (t > lqr_on + 1e-6) & (t < lqr_off - 1e-6)
    assert np.all(short_trace.mode[in_hold] == 3)
    assert set(np.unique(short_trace.mode)) == {1, 2, 3}


def test_attach_is_continuous(short_trace, short_plan):
    # instantaneous mass coupling preserves position and velocity
    i = int(np.searchsorted(short_trace.t, short_plan.attach_time))
    dv = np.linalg.norm(short_trace.x[i + 1, 7:10] - short_trace.x[i - 1, 7:10])
    assert dv < 5e-3


def test_metrics_of_short_mission(short_trace, short_plan):
    m = metrics(short_trace, short_plan)
    assert m["rmse"] < 0.05
    assert m["peak_error"] < 0.10
    assert m["grasp_miss"] <= 0.02
    assert m["final_payload_error"] < 0.02
    assert m["max_swing"] < 0.30
    npt.assert_allclose(m["duration"], short_plan.duration, atol=1e-6)
    npt.assert_allclose(sum(m["segment_durations"]), m["flight_time"], atol=1e-9)


def test_payload_rests_after_release(short_trace, short_spec, short_plan):
    after = short_trace.t > short_plan.release_time + 1e-6
    final = short_trace.payload[-1]
    # payload position is frozen from release onward
    assert np.all(np.linalg.norm(short_trace.payload[after] - final, axis=1) < 1e-12)
    assert np.linalg.norm(final - short_spec.r_L_target) < 0.02


def test_csv_export_schema(tmp_path, short_trace):
    path = tmp_path / "trace.csv"
    short_trace.write_csv(path)
    with open(path) as f:
        header = f.readline().strip()
    assert header == (
        "t,x,y,z,phi,theta,psi,alpha,vx,vy,vz,dphi,dtheta,dpsi,dalpha,"
        "F,taux,tauy,tauz,mode,mL_attached"
    )
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (short_trace.t.size, 21)


# ---------------------------------------------------------------------------
# determinism and failure guards
# ---------------------------------------------------------------------------

def test_runs_are_bit_identical(short_spec, short_plan, loaded):
    cfg = SimConfig(duration=4.0)
    a = run_mission(short_spec, short_plan, cfg, loaded)
    b = run_mission(short_spec, short_plan, cfg, loaded)
    npt.assert_array_equal(a.x, b.x)
    npt.assert_array_equal(a.u, b.u)
    npt.assert_array_equal(a.mode, b.mode)
    # seeded measurement noise is reproducible too
    cfg_n = SimConfig(duration=2.0, noise_sigma=1e-4, seed=5)
    c = run_mission(short_spec, short_plan, cfg_n, loaded)
    d = run_mission(short_spec, short_plan, cfg_n, loaded)
    npt.assert_array_equal(c.x, d.x)


def test_offset_payload_fails_the_grasp(short_spec, short_plan, loaded):
    from dataclasses import replace

    moved = replace(short_spec, r_L_init=short_spec.r_L_init + [0.1, 0.0, 0.0])
    with pytest.raises(GraspFailed) as err:
        run_mission(moved, short_plan, SimConfig(), loaded)
    assert err.value.distance > 0.05


def test_mismatched_plan_is_rejected(short_spec, short_plan, loaded):
    from dataclasses import replace

    other = replace(short_spec, r0=short_spec.r0 + [0.5, 0.0, 0.0])
    with pytest.raises(ValueError):
        run_mission(other, short_plan, SimConfig(), loaded)


def test_overwhelming_noise_diverges(short_spec, short_plan, loaded):
    cfg = SimConfig(duration=5.0, noise_sigma=1.5, seed=1)
    with pytest.raises(Diverged):
        run_mission(short_spec, short_plan, cfg, loaded)


def test_trace_validation():
    t = np.array([0.0, 1.0, 0.5])  # not increasing
    n = 3
    with pytest.raises(ValueError):
        SimTrace(
            t, np.zeros((n, 14)), np.zeros((n, 4)), np.zeros(n, dtype=int),
            np.zeros((n, 3)), np.zeros((n, 3)), np.zeros(n, dtype=bool),
        )
