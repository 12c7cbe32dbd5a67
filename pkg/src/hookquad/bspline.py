"""Clamped B-spline curves on [0, 1] and the quadratic forms used by the
spatial trajectory optimizer.

A path is represented by control points ``coeffs`` (n_c, 3) over a clamped,
uniform knot vector.  Basis and basis-derivative values are computed with the
Cox-de Boor recurrence, vectorized over evaluation sites; the smoothness and
length costs are exact Gauss-Legendre integrals of squared basis-derivative
products, returned as positive-semidefinite Gram matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OrderTooHigh


def uniform_clamped_knots(degree: int, n_coeffs: int) -> np.ndarray:
    """Clamped knot vector on [0, 1] with evenly spaced interior knots."""
    if degree < 1:
        raise ValueError(f"degree must be >= 1, got {degree}")
    if n_coeffs < degree + 1:
        raise ValueError(f"need at least degree+1={degree + 1} coefficients, got {n_coeffs}")
    n_interior = n_coeffs - degree - 1
    interior = np.linspace(0.0, 1.0, n_interior + 2)[1:-1]
    return np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])


def basis_matrix(knots: np.ndarray, degree: int, s: np.ndarray, deriv: int = 0) -> np.ndarray:
    """Matrix of basis (derivative) values, shape (len(s), n_coeffs).

    Row ``i`` holds the ``deriv``-th derivatives of all basis functions at
    ``s[i]``, so ``basis_matrix(...) @ coeffs`` evaluates the curve.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any((s < -1e-12) | (s > 1.0 + 1e-12)):
        raise ValueError("evaluation sites must lie in [0, 1]")
    s = np.clip(s, 0.0, 1.0)
    if deriv < 0:
        raise ValueError("derivative order must be nonnegative")
    if deriv > degree:
        raise OrderTooHigh(f"derivative order {deriv} exceeds spline degree {degree}")

    t = np.asarray(knots, dtype=float)
    n_coeffs = len(t) - degree - 1
    m = s.size
    if m == 1:
        return _basis_row(t, degree, float(s[0]), deriv, n_coeffs)[None, :]

    # zeroth-degree basis: indicator of the half-open knot span, with s = 1
    # assigned to the last nonempty span
    col = len(t) - 1
    N = np.zeros((m, col))
    idx = np.searchsorted(t, s, side="right") - 1
    idx = np.minimum(idx, np.searchsorted(t, 1.0, side="left") - 1)
    N[np.arange(m), idx] = 1.0

    base_degree = degree - deriv
    for q in range(1, base_degree + 1):
        new = np.zeros((m, col - q))
        for j in range(col - q):
            den1 = t[j + q] - t[j]
            if den1 > 0.0:
                new[:, j] += (s - t[j]) / den1 * N[:, j]
            den2 = t[j + q + 1] - t[j + 1]
            if den2 > 0.0:
                new[:, j] += (t[j + q + 1] - s) / den2 * N[:, j + 1]
        N = new
    # lift to derivatives of the full-degree basis
    for q in range(base_degree + 1, degree + 1):
        new = np.zeros((m, col - q))
        for j in range(col - q):
            den1 = t[j + q] - t[j]
            if den1 > 0.0:
                new[:, j] += q / den1 * N[:, j]
            den2 = t[j + q + 1] - t[j + 1]
            if den2 > 0.0:
                new[:, j] -= q / den2 * N[:, j + 1]
        N = new
    assert N.shape[1] == n_coeffs
    return N


def _basis_row(t: np.ndarray, degree: int, s: float, deriv: int, n_coeffs: int) -> np.ndarray:
    """Single-site basis row via the same recurrence restricted to the
    active knot span, where at most degree+1 functions are nonzero."""
    col = len(t) - 1
    k = int(np.searchsorted(t, s, side="right")) - 1
    k = min(k, int(np.searchsorted(t, 1.0, side="left")) - 1)
    tl = t.tolist()

    vals = [1.0]  # columns k-q .. k at stage q, starting with stage 0
    base_degree = degree - deriv
    for q in range(1, base_degree + 1):
        new = [0.0] * (q + 1)
        for i, j in enumerate(range(k - q, k + 1)):
            if j < 0 or j >= col - q:
                continue
            acc = 0.0
            den1 = tl[j + q] - tl[j]
            if den1 > 0.0 and 0 <= j - (k - q + 1) < len(vals):
                acc += (s - tl[j]) / den1 * vals[j - (k - q + 1)]
            den2 = tl[j + q + 1] - tl[j + 1]
            if den2 > 0.0 and 0 <= j + 1 - (k - q + 1) < len(vals):
                acc += (tl[j + q + 1] - s) / den2 * vals[j + 1 - (k - q + 1)]
            new[i] = acc
        vals = new
    for q in range(base_degree + 1, degree + 1):
        new = [0.0] * (q + 1)
        for i, j in enumerate(range(k - q, k + 1)):
            if j < 0 or j >= col - q:
                continue
            acc = 0.0
            den1 = tl[j + q] - tl[j]
            if den1 > 0.0 and 0 <= j - (k - q + 1) < len(vals):
                acc += q / den1 * vals[j - (k - q + 1)]
            den2 = tl[j + q + 1] - tl[j + 1]
            if den2 > 0.0 and 0 <= j + 1 - (k - q + 1) < len(vals):
                acc -= q / den2 * vals[j + 1 - (k - q + 1)]
            new[i] = acc
        vals = new

    row = np.zeros(n_coeffs)
    for i, j in enumerate(range(k - degree, k + 1)):
        if 0 <= j < n_coeffs:
            row[j] = vals[i]
    return row


@dataclass
class SplinePath:
    """Clamped B-spline curve in R^3 parameterized on s in [0, 1]."""

    degree: int
    knots: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        self.knots = np.asarray(self.knots, dtype=float)
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.ndim != 2 or self.coeffs.shape[1] != 3:
            raise ValueError("coeffs must have shape (n_coeffs, 3)")
        n_c = len(self.knots) - self.degree - 1
        if n_c != self.coeffs.shape[0]:
            raise ValueError(
                f"knot count {len(self.knots)} inconsistent with {self.coeffs.shape[0]} coefficients"
            )
        if n_c < self.degree + 1:
            raise ValueError("too few coefficients for the requested degree")
        if np.any(np.diff(self.knots) < 0):
            raise ValueError("knots must be nondecreasing")
        k = self.degree + 1
        if not (np.all(self.knots[:k] == self.knots[0]) and np.all(self.knots[-k:] == self.knots[-1])):
            raise ValueError("knot vector must be clamped")
        if self.knots[0] != 0.0 or self.knots[-1] != 1.0:
            raise ValueError("parameter domain must be [0, 1]")

    @property
    def n_coeffs(self) -> int:
        return self.coeffs.shape[0]

    def eval(self, s, deriv: int = 0) -> np.ndarray:
        """Curve value or s-derivative at ``s`` (scalar -> (3,), array -> (m, 3))."""
        scalar = np.isscalar(s) or np.ndim(s) == 0
        out = basis_matrix(self.knots, self.degree, s, deriv) @ self.coeffs
        return out[0] if scalar else out

    def to_dict(self) -> dict:
        return {
            "degree": int(self.degree),
            "knots": self.knots.tolist(),
            "coeffs": self.coeffs.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SplinePath":
        return cls(int(data["degree"]), np.array(data["knots"]), np.array(data["coeffs"]))


def eval_path(path: SplinePath, s, deriv: int = 0) -> np.ndarray:
    return path.eval(s, deriv)


@dataclass
class QuadraticForm:
    """Gram matrix M of a per-axis quadratic cost sum_axis c_ax^T M c_ax."""

    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError("Gram matrix must be square")
        if not np.allclose(self.matrix, self.matrix.T, atol=1e-12):
            raise ValueError("Gram matrix must be symmetric")

    def value(self, coeffs: np.ndarray) -> float:
        coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
        if coeffs.ndim == 2 and coeffs.shape[0] == self.matrix.shape[0]:
            return float(np.einsum("ia,ij,ja->", coeffs, self.matrix, coeffs))
        raise ValueError("coefficient array shape does not match the Gram matrix")


def _derivative_gram(knots: np.ndarray, degree: int, deriv: int) -> np.ndarray:
    """Gram matrix of the ``deriv``-th basis derivatives, integrated on [0, 1].

    Gauss-Legendre quadrature per knot span with ceil((2*degree + 1)/2) nodes,
    exact for the piecewise-polynomial integrand.
    """
    n_nodes = (2 * degree + 1 + 1) // 2
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    spans = np.unique(np.asarray(knots, dtype=float))
    n_c = len(knots) - degree - 1
    M = np.zeros((n_c, n_c))
    for a, b in zip(spans[:-1], spans[1:]):
        half = 0.5 * (b - a)
        mid = 0.5 * (a + b)
        sg = mid + half * nodes
        Bg = basis_matrix(knots, degree, sg, deriv)
        M += half * (Bg.T * weights) @ Bg
    return 0.5 * (M + M.T)


def jerk_gram(degree: int, knots: np.ndarray) -> QuadraticForm:
    """Quadratic form of the integrated squared third derivative."""
    if degree < 3:
        raise OrderTooHigh(f"jerk cost needs degree >= 3, got {degree}")
    return QuadraticForm(_derivative_gram(knots, degree, 3))


def arclength_surrogate_gram(degree: int, knots: np.ndarray) -> QuadraticForm:
    """Quadratic form of the integrated squared first derivative.

    This is the convex surrogate used in place of squared arc length: for a
    straight segment traversed affinely it equals the squared length, and in
    general it upper-bounds it.
    """
    return QuadraticForm(_derivative_gram(knots, degree, 1))


def greville_abscissae(knots: np.ndarray, degree: int) -> np.ndarray:
    """Greville sites; placing control points at them reproduces affine maps."""
    t = np.asarray(knots, dtype=float)
    n_c = len(t) - degree - 1
    return np.array([t[i + 1 : i + degree + 1].mean() for i in range(n_c)])
