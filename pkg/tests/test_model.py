"""Dynamics-model invariants.

Covers the structural identities the equations of motion must satisfy
regardless of parameters: mass-matrix symmetry, the skew-symmetry of
``H_dot - 2C``, energy conservation of the unforced system, hover
equilibria, linearization consistency, and the kinematic helper maps.
"""

import numpy as np
import numpy.testing as npt
import pytest

from hookquad.errors import NotEquilibrium, SingularOrientation
from hookquad.model import (
    ControlInput,
    FullState,
    SystemParams,
    attitude_from_force,
    euler_rate_map,
    euler_zyx_from_rotation,
    full_dynamics,
    full_dynamics_batch,
    hat,
    hook_tip_position,
    hover_input,
    hover_state,
    lagrangian_matrices,
    linearize,
    rotation_zyx,
    rotation_zyx_partials,
    state_derivative,
    total_energy,
    vee,
)


def _random_state(rng, rate_scale=1.0):
    xi = np.concatenate([
        rng.uniform(-1.0, 1.0, 3),
        rng.uniform(-0.5, 0.5, 2),
        rng.uniform(-np.pi, np.pi, 1),
        rng.uniform(-0.6, 0.6, 1),
    ])
    return FullState(xi, rate_scale * rng.uniform(-1.0, 1.0, 7))


# ---------------------------------------------------------------------------
# rotation and rate-map kinematics
# ---------------------------------------------------------------------------

def test_hat_vee_roundtrip():
    rng = np.random.default_rng(0)
    v = rng.standard_normal(3)
    npt.assert_allclose(vee(hat(v)), v, rtol=0, atol=0)
    w = rng.standard_normal(3)
    npt.assert_allclose(hat(v) @ w, np.cross(v, w), atol=1e-15)


def test_rotation_is_orthonormal():
    rng = np.random.default_rng(1)
    for _ in range(20):
        lam = rng.uniform(-1.2, 1.2, 3)
        R = rotation_zyx(lam)
        npt.assert_allclose(R.T @ R, np.eye(3), atol=1e-14)
        npt.assert_allclose(np.linalg.det(R), 1.0, atol=1e-14)


def test_rotation_partials_match_finite_differences():
    rng = np.random.default_rng(2)
    lam = rng.uniform(-0.8, 0.8, 3)
    dR = rotation_zyx_partials(lam)
    h = 1e-7
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        fd = (rotation_zyx(lam + e) - rotation_zyx(lam - e)) / (2 * h)
        npt.assert_allclose(dR[i], fd, atol=1e-8)


def test_euler_rate_map_consistent_with_rotation_derivative():
    # omega = Q(lam) lam_dot must reproduce R_dot = R hat(omega)
    rng = np.random.default_rng(3)
    lam = rng.uniform(-0.8, 0.8, 3)
    lam_dot = rng.standard_normal(3)
    omega = euler_rate_map(lam) @ lam_dot
    h = 1e-7
    R_dot = (rotation_zyx(lam + h * lam_dot) - rotation_zyx(lam - h * lam_dot)) / (2 * h)
    npt.assert_allclose(R_dot, rotation_zyx(lam) @ hat(omega), atol=1e-7)


def test_euler_angle_extraction_roundtrip():
    rng = np.random.default_rng(4)
    lam = rng.uniform(-1.0, 1.0, 3)
    npt.assert_allclose(euler_zyx_from_rotation(rotation_zyx(lam)), lam, atol=1e-12)


def test_attitude_from_force_properties():
    rng = np.random.default_rng(5)
    for _ in range(10):
        f = rng.standard_normal(3)
        f[2] = abs(f[2]) + 1.0
        psi = rng.uniform(-np.pi, np.pi)
        R = attitude_from_force(f, psi)
        npt.assert_allclose(R.T @ R, np.eye(3), atol=1e-14)
        # body z axis aligns with the demanded force direction
        npt.assert_allclose(R[:, 2], f / np.linalg.norm(f), atol=1e-14)
        # body x stays orthogonal to b2 = b3 x heading by construction
        heading = np.array([np.cos(psi), np.sin(psi), 0.0])
        npt.assert_allclose(R[:, 1] @ heading, 0.0, atol=1e-14)
    # a vertical force demand reduces to a pure yaw rotation
    R = attitude_from_force(np.array([0.0, 0.0, 2.5]), 0.7)
    npt.assert_allclose(R, rotation_zyx(np.array([0.0, 0.0, 0.7])), atol=1e-15)


# ---------------------------------------------------------------------------
# Lagrangian structure
# ---------------------------------------------------------------------------

def test_mass_matrix_symmetric_positive_definite(loaded):
    rng = np.random.default_rng(6)
    for _ in range(10):
        st = _random_state(rng)
        H, _C, _G, _Xi = lagrangian_matrices(st, loaded)
        npt.assert_allclose(H, H.T, atol=1e-14)
        assert np.min(np.linalg.eigvalsh(H)) > 0.0


def test_mass_matrix_rate_minus_twice_coriolis_is_skew(loaded):
    # Christoffel construction: z^T (H_dot - 2C) z = 0 for every z
    rng = np.random.default_rng(7)
    h = 1e-6
    worst = 0.0
    for _ in range(20):
        st = _random_state(rng)
        _H, C, _G, _Xi = lagrangian_matrices(st, loaded)
        Hp = lagrangian_matrices(FullState(st.xi + h * st.xi_dot, st.xi_dot), loaded)[0]
        Hm = lagrangian_matrices(FullState(st.xi - h * st.xi_dot, st.xi_dot), loaded)[0]
        S = (Hp - Hm) / (2 * h) - 2.0 * C
        A = 0.5 * (S + S.T)  # symmetric part must vanish
        worst = max(worst, float(np.max(np.abs(A))))
    assert worst < 1e-6


def test_unforced_energy_is_conserved(loaded):
    from hookquad.sim import step

    st = FullState(
        np.array([0.0, 0.0, 1.0, 0.25, -0.2, 0.3, 0.5]),
        np.array([0.3, -0.2, 0.1, 0.6, -0.5, 0.4, 1.0]),
    )
    u = ControlInput(0.0, np.zeros(3))
    E0 = total_energy(st, loaded)
    dt = 1e-4
    for _ in range(int(1.0 / dt)):
        st = step(st, u, loaded, dt)
    assert abs(total_energy(st, loaded) - E0) < 1e-6


def test_massless_pendulum_swing_acceleration_is_zero():
    p = SystemParams(m_h=0.0, m_L=0.0)
    rng = np.random.default_rng(8)
    st = _random_state(rng)
    acc = full_dynamics(st, ControlInput(3.0, np.array([0.01, -0.02, 0.005])), p)
    assert acc.shape == (7,)
    assert acc[6] == 0.0


def test_pitch_singularity_raises(loaded):
    st = FullState(np.array([0, 0, 1, 0, np.pi / 2, 0, 0.0]), np.zeros(7))
    with pytest.raises(SingularOrientation):
        lagrangian_matrices(st, loaded)


# ---------------------------------------------------------------------------
# equilibria and linearization
# ---------------------------------------------------------------------------

def test_hover_is_equilibrium(params, loaded):
    for p in (params, loaded):
        x0 = hover_state(p).as_vector()
        u0 = hover_input(p)
        npt.assert_allclose(state_derivative(x0, u0, p), np.zeros(14), atol=1e-12)


def test_hover_thrust_values(params, loaded):
    # hover balances drone + hook (+ payload when attached)
    npt.assert_allclose(hover_input(params)[0], 0.615 * 9.81, atol=1e-12)
    npt.assert_allclose(hover_input(loaded)[0], 6.7689, atol=1e-10)
    npt.assert_allclose(hover_input(params)[1:], np.zeros(3), atol=0)


def test_linearize_matches_finite_differences(loaded):
    x0 = hover_state(loaded).as_vector()
    u0 = hover_input(loaded)
    A, B = linearize(x0, u0, loaded)
    assert A.shape == (14, 14) and B.shape == (14, 4)
    h = 1e-6
    for j in range(14):
        e = np.zeros(14)
        e[j] = h
        fd = (state_derivative(x0 + e, u0, loaded) - state_derivative(x0 - e, u0, loaded)) / (2 * h)
        npt.assert_allclose(A[:, j], fd, atol=1e-5)
    for j in range(4):
        e = np.zeros(4)
        e[j] = h
        fd = (state_derivative(x0, u0 + e, loaded) - state_derivative(x0, u0 - e, loaded)) / (2 * h)
        npt.assert_allclose(B[:, j], fd, atol=1e-5)


def test_linearize_rejects_non_equilibrium(loaded):
    x0 = hover_state(loaded).as_vector()
    x0[7] = 0.4  # nonzero velocity: not an equilibrium
    with pytest.raises(NotEquilibrium):
        linearize(x0, hover_input(loaded), loaded)


# ---------------------------------------------------------------------------
# batch evaluation and geometry helpers
# ---------------------------------------------------------------------------

def test_batched_dynamics_matches_single(loaded):
    rng = np.random.default_rng(9)
    states = [_random_state(rng) for _ in range(16)]
    us = rng.uniform(-1.0, 1.0, (16, 4))
    us[:, 0] += 6.0
    xi = np.stack([s.xi for s in states])
    xi_dot = np.stack([s.xi_dot for s in states])
    batch = full_dynamics_batch(xi, xi_dot, us, loaded)
    for i, st in enumerate(states):
        single = full_dynamics(st, ControlInput(us[i, 0], us[i, 1:]), loaded)
        npt.assert_allclose(batch[i], single, rtol=0, atol=1e-12)


def test_hook_tip_position_geometry(loaded):
    # straight-down pendulum from a level vehicle: tip is L below the hinge
    st = hover_state(loaded, r=np.array([1.0, 2.0, 3.0]))
    npt.assert_allclose(hook_tip_position(st, loaded), [1.0, 2.0, 3.0 - loaded.L], atol=1e-15)
    # positive swing angle moves the tip toward -x in the body frame
    a = 0.3
    st = FullState(np.array([0, 0, 1, 0, 0, 0, a]), np.zeros(7))
    expect = np.array([-loaded.L * np.sin(a), 0.0, 1.0 - loaded.L * np.cos(a)])
    npt.assert_allclose(hook_tip_position(st, loaded), expect, atol=1e-15)


def test_parameter_validation():
    with pytest.raises(ValueError):
        SystemParams(m=-1.0)
    with pytest.raises(ValueError):
        SystemParams(d_h=0.5, L=0.4)  # opening wider than the pole
    p = SystemParams().with_payload(0.075)
    npt.assert_allclose(p.tip_mass, 0.085)
    npt.assert_allclose(p.hover_thrust, 0.69 * 9.81)
