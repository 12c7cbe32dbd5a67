"""B-spline basis and path properties.

Partition of unity, endpoint interpolation of the clamped basis, agreement
between the scalar and vectorized evaluation paths, derivative consistency,
and the quadratic forms used by the segment optimizer.
"""

import numpy as np
import numpy.testing as npt
import pytest

from hookquad.bspline import (
    SplinePath,
    arclength_surrogate_gram,
    basis_matrix,
    greville_abscissae,
    jerk_gram,
    uniform_clamped_knots,
)
from hookquad.errors import OrderTooHigh


@pytest.mark.parametrize("degree,n_coeffs", [(3, 8), (4, 10), (5, 12)])
def test_partition_of_unity(degree, n_coeffs):
    knots = uniform_clamped_knots(degree, n_coeffs)
    s = np.linspace(0.0, 1.0, 1001)
    B = basis_matrix(knots, degree, s)
    npt.assert_allclose(B.sum(axis=1), np.ones_like(s), atol=1e-12)
    assert np.all(B >= -1e-14)


@pytest.mark.parametrize("degree,n_coeffs", [(3, 8), (5, 12)])
def test_clamped_basis_interpolates_endpoints(degree, n_coeffs):
    knots = uniform_clamped_knots(degree, n_coeffs)
    B = basis_matrix(knots, degree, np.array([0.0, 1.0]))
    expect = np.zeros((2, n_coeffs))
    expect[0, 0] = 1.0
    expect[1, -1] = 1.0
    npt.assert_allclose(B, expect, atol=1e-14)


def test_scalar_and_vector_paths_agree():
    # single-site evaluation takes a windowed fast path; it must agree with
    # the vectorized recurrence to the last bit
    for degree, n_coeffs in [(3, 8), (4, 9), (5, 12)]:
        knots = uniform_clamped_knots(degree, n_coeffs)
        sites = np.concatenate([
            np.linspace(0.0, 1.0, 57),
            knots[degree:-degree],  # interior knots and endpoints
        ])
        for deriv in range(degree + 1):
            full = basis_matrix(knots, degree, sites, deriv)
            for i, s in enumerate(sites):
                one = basis_matrix(knots, degree, np.array([s]), deriv)
                npt.assert_array_equal(one[0], full[i])


def test_basis_derivative_matches_finite_differences():
    degree, n_coeffs = 5, 12
    knots = uniform_clamped_knots(degree, n_coeffs)
    s = np.linspace(0.02, 0.98, 25)
    h = 1e-6
    for deriv in (1, 2, 3):
        lo = basis_matrix(knots, degree, s - h, deriv - 1)
        hi = basis_matrix(knots, degree, s + h, deriv - 1)
        fd = (hi - lo) / (2 * h)
        npt.assert_allclose(basis_matrix(knots, degree, s, deriv), fd, atol=5e-4)


def test_derivative_order_above_degree_raises():
    knots = uniform_clamped_knots(3, 8)
    with pytest.raises(OrderTooHigh):
        basis_matrix(knots, 3, np.array([0.5]), 4)


def test_jerk_gram_matches_numerical_quadrature():
    degree, n_coeffs = 5, 9
    knots = uniform_clamped_knots(degree, n_coeffs)
    M = jerk_gram(degree, knots).matrix
    npt.assert_allclose(M, M.T, atol=1e-12)
    s = np.linspace(0.0, 1.0, 4001)
    D3 = basis_matrix(knots, degree, s, 3)
    quad = np.trapezoid(D3[:, :, None] * D3[:, None, :], s, axis=0)
    npt.assert_allclose(M, quad, rtol=1e-4, atol=1e-4 * np.max(np.abs(M)))
    # jerk energy of a known curve: cubic coefficients sampled on the
    # Greville sites reproduce s^3, whose third derivative is 6
    g = greville_abscissae(knots, degree)
    coeffs = np.linalg.lstsq(basis_matrix(knots, degree, g), g**3, rcond=None)[0]
    npt.assert_allclose(coeffs @ M @ coeffs, 36.0, rtol=1e-6)


def test_arclength_surrogate_is_first_derivative_energy():
    degree, n_coeffs = 5, 9
    knots = uniform_clamped_knots(degree, n_coeffs)
    M = arclength_surrogate_gram(degree, knots).matrix
    # the straight line s -> s has unit first-derivative energy
    g = greville_abscissae(knots, degree)
    coeffs = np.linalg.lstsq(basis_matrix(knots, degree, g), g, rcond=None)[0]
    npt.assert_allclose(coeffs @ M @ coeffs, 1.0, rtol=1e-10)


def test_spline_path_eval_shapes_and_line():
    degree, n_coeffs = 5, 12
    knots = uniform_clamped_knots(degree, n_coeffs)
    g = greville_abscissae(knots, degree)
    start, end = np.array([1.0, -2.0, 0.5]), np.array([2.0, 0.0, 1.5])
    coeffs = start[None, :] + g[:, None] * (end - start)[None, :]
    path = SplinePath(degree, knots, coeffs)
    s = np.linspace(0.0, 1.0, 11)
    pos = path.eval(s, 0)
    assert pos.shape == (11, 3)
    npt.assert_allclose(pos, start[None, :] + s[:, None] * (end - start)[None, :], atol=1e-12)
    npt.assert_allclose(path.eval(s, 1), np.tile(end - start, (11, 1)), atol=1e-11)
    npt.assert_allclose(path.eval(s, 2), np.zeros((11, 3)), atol=1e-10)
