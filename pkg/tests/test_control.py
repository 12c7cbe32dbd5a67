"""Controllers and regulator design.

The geometric tracking law is checked at hover and against its bounded
corrective terms; the Riccati solver against closed forms and residuals;
the regulator gain for its pinned entries, stability margins, and Lyapunov
decrease; and the mission scheduler for its mode sequence.
"""

import warnings

import numpy as np
import numpy.testing as npt
import pytest

from hookquad.control import (
    GeomGains,
    LqrGain,
    care_residual,
    control_mode,
    feedforward_thrust,
    geometric_control,
    lqr_control,
    lqr_design,
    reference_rotation,
    robust_attitude_term,
    robust_position_term,
    scheduled_control,
    solve_care,
)
from hookquad.errors import NotStabilizable
from hookquad.model import (
    FullState,
    QuadState,
    SystemParams,
    hover_state,
    rotation_zyx,
)
from hookquad.verify import OperatingRegion


# ---------------------------------------------------------------------------
# geometric tracking law
# ---------------------------------------------------------------------------

def _hover_ref(r=np.zeros(3), psi=0.0):
    return (
        np.asarray(r, dtype=float), np.zeros(3), np.zeros(3),
        rotation_zyx(np.array([0.0, 0.0, psi])), np.zeros(3), np.zeros(3),
    )


def test_hover_thrust_of_tracking_law(params):
    # with zero errors only the bare-mass weight term survives
    quad = QuadState(np.zeros(3), np.zeros(3), np.eye(3), np.zeros(3))
    u = geometric_control(quad, _hover_ref(), GeomGains(), params)
    npt.assert_allclose(u.F, 5.935050, atol=1e-6)
    npt.assert_allclose(u.tau, np.zeros(3), atol=1e-12)


def test_payload_feedforward_at_level_attitude(loaded):
    # adds m_L g resolved along body z: 0.075 * 9.81 at R = I
    npt.assert_allclose(feedforward_thrust(0.0, np.eye(3), loaded), 0.73575, atol=1e-12)
    R = rotation_zyx(np.array([0.3, -0.2, 0.5]))
    expect = loaded.m_L * loaded.g * R[2, 2]
    npt.assert_allclose(feedforward_thrust(1.0, R, loaded), 1.0 + expect, atol=1e-12)


def test_corrective_terms_respect_bounds():
    gains = GeomGains()
    rng = np.random.default_rng(11)
    e = rng.standard_normal((10_000, 3)) * np.logspace(-6, 1, 10_000)[:, None]
    for row in e:
        mu_r = robust_position_term(row, gains)
        mu_R = robust_attitude_term(row, gains)
        assert np.linalg.norm(mu_r) <= gains.delta_r * (1 + 1e-12)
        assert np.linalg.norm(mu_R) <= gains.delta_R * (1 + 1e-12)
        # both act against the error direction
        assert mu_r @ row <= 0.0
        assert mu_R @ row <= 0.0


def test_corrective_term_saturates_toward_bound():
    gains = GeomGains()
    big = np.array([1e4, 0.0, 0.0])
    npt.assert_allclose(np.linalg.norm(robust_position_term(big, gains)),
                        gains.delta_r, rtol=1e-4)
    npt.assert_allclose(np.linalg.norm(robust_attitude_term(big, gains)),
                        gains.delta_R, rtol=1e-4)


def test_attitude_error_vanishes_on_track(params):
    R = rotation_zyx(np.array([0.2, -0.1, 0.8]))
    quad = QuadState(np.zeros(3), np.zeros(3), R, np.zeros(3))
    ref = (np.zeros(3), np.zeros(3), np.zeros(3), R, np.zeros(3), np.zeros(3))
    u = geometric_control(quad, ref, GeomGains(), params)
    # e_R = e_omega = 0: torque reduces to the (zero) gyroscopic terms
    npt.assert_allclose(u.tau, np.zeros(3), atol=1e-9)


def test_gain_validation():
    with pytest.raises(ValueError):
        GeomGains(kappa=2.0)  # needs kappa > 2
    with pytest.raises(ValueError):
        GeomGains(delta_r=0.0)


# ---------------------------------------------------------------------------
# Riccati solver
# ---------------------------------------------------------------------------

def test_scalar_riccati_closed_form():
    # a = b = q = r = 1: p^2 - 2p - 1 = 0, stabilizing root 1 + sqrt(2)
    P = solve_care(np.eye(1), np.eye(1), np.eye(1), np.eye(1))
    npt.assert_allclose(P[0, 0], 1.0 + np.sqrt(2.0), rtol=1e-12)


def test_random_systems_solve_to_tolerance():
    rng = np.random.default_rng(13)
    for n, m in ((2, 1), (4, 2), (8, 3)):
        A = rng.standard_normal((n, n))
        B = rng.standard_normal((n, m))
        Wq = np.eye(n)
        Wr = np.eye(m)
        P = solve_care(A, B, Wq, Wr)
        npt.assert_allclose(P, P.T, atol=1e-12)
        assert np.min(np.linalg.eigvalsh(P)) >= -1e-9
        assert care_residual(A, B, Wq, Wr, P) < 1e-6
        K = np.linalg.solve(Wr, B.T @ P)
        assert np.max(np.linalg.eigvals(A - B @ K).real) < 0.0


def test_unstabilizable_pair_is_rejected():
    from hookquad.control import _assert_stabilizable

    # an unstable mode with no input authority
    A = np.diag([1.0, -1.0])
    B = np.array([[0.0], [1.0]])
    with pytest.raises(NotStabilizable):
        _assert_stabilizable(A, B)


# ---------------------------------------------------------------------------
# regulator about loaded hover
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def gain(loaded):
    return lqr_design(loaded)


def test_design_point_is_loaded_hover(gain, loaded):
    npt.assert_allclose(gain.u0[0], 6.7689, atol=1e-10)
    npt.assert_allclose(gain.u0[1:], np.zeros(3), atol=0)
    npt.assert_allclose(gain.x0, np.zeros(14), atol=0)


def test_gain_pinned_entries(gain):
    # altitude feedback into thrust: sqrt(weight ratio 100/5)
    npt.assert_allclose(gain.K[0, 2], np.sqrt(20.0), rtol=1e-6)
    # swing angle couples into the pitch torque channel
    npt.assert_allclose(gain.K[2, 6], -0.1501, atol=2e-4)
    assert abs(gain.K[2, 6]) > 0.05


def test_closed_loop_is_hurwitz(gain, loaded):
    from hookquad.model import hover_input, linearize

    A, B = linearize(np.zeros(14), hover_input(loaded), loaded)
    eigs = np.linalg.eigvals(A - B @ gain.K)
    assert np.max(eigs.real) < -1e-3


def test_lyapunov_decrease_near_equilibrium(gain, loaded):
    # V = x' P x must decrease along the closed nonlinear flow
    from hookquad.model import state_derivative

    rng = np.random.default_rng(17)
    for _ in range(20):
        dx = rng.uniform(-0.05, 0.05, 14)
        u = gain.u0 - gain.K @ dx
        f = state_derivative(gain.x0 + dx, u, loaded)
        V_dot = 2.0 * dx @ gain.P @ f
        assert V_dot < 0.0


def test_feedback_is_affine(gain):
    rng = np.random.default_rng(19)
    dx = rng.uniform(-0.1, 0.1, 14)
    st = FullState(gain.x0[:7] + dx[:7], gain.x0[7:] + dx[7:])
    u = lqr_control(st, gain)
    npt.assert_allclose(u.as_vector(), gain.u0 - gain.K @ dx, atol=1e-12)


def test_out_of_region_warns_but_acts(gain, loaded):
    region = OperatingRegion.default(loaded)
    st = FullState(np.concatenate([[5.0], np.zeros(6)]), np.zeros(7))
    with pytest.warns(UserWarning):
        u = lqr_control(st, gain, region=region)
    npt.assert_allclose(u.as_vector(), gain.u0 - gain.K @ st.as_vector(), atol=1e-12)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        lqr_control(hover_state(loaded), gain, region=region)  # inside: silent


# ---------------------------------------------------------------------------
# mission scheduling
# ---------------------------------------------------------------------------

def test_mode_sequence_over_timeline(nominal_plan):
    b = nominal_plan.boundaries()
    mids = 0.5 * (b[:-1] + b[1:])
    modes = [control_mode(t, nominal_plan) for t in mids]
    assert modes == [2, 2, 1, 3, 1, 2]
    # exactly two switches into/out of the regulator
    t_grid = np.arange(0.0, nominal_plan.duration, 0.05)
    seq = np.array([control_mode(t, nominal_plan) for t in t_grid])
    lqr_edges = np.sum(np.abs(np.diff((seq == 3).astype(int))))
    assert lqr_edges == 2


def test_scheduled_control_dispatch(nominal_plan, loaded, gain):
    gains = GeomGains()
    b = nominal_plan.boundaries()
    t_hold = 0.5 * (b[3] + b[4])
    r_d = nominal_plan.reference(t_hold)[0]
    st = hover_state(loaded, r=r_d)
    u = scheduled_control(t_hold, st, nominal_plan, gains, gain, loaded)
    # at the setpoint the regulator outputs the hover input
    npt.assert_allclose(u.F, gain.u0[0], atol=1e-9)
    npt.assert_allclose(u.tau, np.zeros(3), atol=1e-9)
    # regulator thrust saturates at 4x hover
    far = FullState(np.array([0, 0, -50.0, 0, 0, 0, 0]) + st.xi, st.xi_dot)
    u = scheduled_control(t_hold, far, nominal_plan, gains, gain, loaded)
    assert 0.0 <= u.F <= 4.0 * gain.u0[0] + 1e-12


def test_reference_rotation_is_orthonormal_and_consistent(nominal_plan, loaded):
    for t in (0.1, 5.0, 25.0, 40.0):
        R_d, omega_d, omega_dot_d = reference_rotation(nominal_plan, t, loaded)
        npt.assert_allclose(R_d.T @ R_d, np.eye(3), atol=1e-12)
        assert omega_d.shape == (3,) and omega_dot_d.shape == (3,)
        # at rest references the angular velocity demand vanishes
    b = nominal_plan.boundaries()
    t_hold = 0.5 * (b[3] + b[4])
    _R, omega_d, _od = reference_rotation(nominal_plan, t_hold, loaded)
    npt.assert_allclose(omega_d, np.zeros(3), atol=1e-9)
