"""Interior-point solver for minimum-time path parameterization.

Given a geometric path ``r(s)`` on s in [0, 1], sampled at K+1 uniform grid
nodes, the solver chooses the squared progress rate ``b_k = s_dot(s_k)^2``
and the per-interval progress acceleration ``a_k = s_ddot`` minimizing

    J = rho * ds * sum_k a_k^2 + (1 - rho) * T

subject to the consistency relation ``b_{k+1} = b_k + 2 ds a_k``, per-axis
velocity bounds ``r'(s_k)^2 b_k <= v_max^2``, per-axis acceleration bounds
``|r''(s_k) b_k + r'(s_k) a_k| <= a_max``, and a per-axis bound on the grid
difference of the acceleration, ``|accel_{k+1} - accel_k| <= lambda_max ds``.

The traversal time uses the exact trapezoidal form
``T = sum_k 2 ds / (sqrt(b_k) + sqrt(b_{k+1}))`` lifted into convex form with
auxiliary variables ``d_k <= sqrt(b_k)`` (a rotated-cone slice
``d_k^2 <= b_k``) and ``c_k (d_k + d_{k+1}) >= 2 ds`` (a hyperbolic
rotated-cone slice), so that ``T <= sum_k c_k``.

The solver is a feasible-start primal log-barrier path-following method with
Newton centering on the equality-constrained barrier problem and a barrier
phase-1 fallback for initialization.  Dual multipliers recovered from the
final central point certify the reported duality gap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import Infeasible, OutOfDomain, SolverStalled

_EPS_ROW = 1e-12


@dataclass
class TimeProfile:
    """Solution of the time allocation on a uniform s-grid.

    ``b`` holds squared progress rates at the K+1 nodes, ``a`` the piecewise
    constant progress acceleration on the K intervals, and ``T`` the total
    traversal time.
    """

    s_grid: np.ndarray
    b: np.ndarray
    a: np.ndarray
    T: float
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.s_grid = np.asarray(self.s_grid, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.a = np.asarray(self.a, dtype=float)
        if self.b.shape != self.s_grid.shape or self.a.shape != (self.s_grid.size - 1,):
            raise ValueError("inconsistent grid shapes")
        if np.any(self.b < -1e-9):
            raise ValueError("squared progress rate must be nonnegative")

    @property
    def K(self) -> int:
        return self.a.size

    def node_times(self) -> np.ndarray:
        """Cumulative arrival times at the grid nodes (t_0 = 0, t_K = T)."""
        sq = np.sqrt(np.maximum(self.b, 0.0))
        ds = self.s_grid[1] - self.s_grid[0]
        dt = 2.0 * ds / np.maximum(sq[:-1] + sq[1:], 1e-30)
        return np.concatenate([[0.0], np.cumsum(dt)])

    def s_of_t(self, t: float) -> tuple[float, float, float]:
        """Map mission-segment time to (s, s_dot, s_ddot).

        Within interval k the progress acceleration is constant, so
        ``s_dot`` is linear in t and ``s`` quadratic.

        Raises
        ------
        OutOfDomain
            If ``t`` is outside [0, T] (with a 1e-9 tolerance).
        """
        tn = self.node_times()
        T = tn[-1]
        if t < -1e-9 or t > T + 1e-9:
            raise OutOfDomain(f"t={t} outside [0, {T}]")
        t = min(max(t, 0.0), T)
        k = int(np.searchsorted(tn, t, side="right") - 1)
        k = min(k, self.K - 1)
        ds = self.s_grid[1] - self.s_grid[0]
        sq = np.sqrt(max(self.b[k], 0.0))
        tau = t - tn[k]
        ak = self.a[k]
        s = self.s_grid[k] + sq * tau + 0.5 * ak * tau * tau
        sdot = sq + ak * tau
        # clamp into the interval to guard round-off at node boundaries
        s = min(max(s, self.s_grid[k]), self.s_grid[k + 1])
        return s, max(sdot, 0.0), ak

    def to_dict(self) -> dict:
        return {
            "s_grid": self.s_grid.tolist(),
            "b": self.b.tolist(),
            "a": self.a.tolist(),
            "T": float(self.T),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TimeProfile":
        return cls(np.array(data["s_grid"]), np.array(data["b"]), np.array(data["a"]), float(data["T"]))


def profile_time(b: np.ndarray, ds: float) -> float:
    sq = np.sqrt(np.maximum(b, 0.0))
    return float(np.sum(2.0 * ds / np.maximum(sq[:-1] + sq[1:], 1e-30)))


class _Problem:
    """Index bookkeeping and barrier assembly for one time-allocation solve."""

    def __init__(self, D1, D2, rho, v_max, a_max, lam_max, b_fixed, K, b_cap=None):
        self.D1, self.D2 = D1, D2
        self.rho = rho
        self.K = K
        self.ds = 1.0 / K
        self.b_fixed = dict(b_fixed)
        self.b_cap = dict(b_cap) if b_cap else {}
        self.b_var_nodes = [k for k in range(K + 1) if k not in self.b_fixed]
        self.nb = len(self.b_var_nodes)
        self.bvar_of_node = {k: i for i, k in enumerate(self.b_var_nodes)}
        # layout: a | b_var | c | d_var
        self.ia = 0
        self.ib = K
        self.ic = K + self.nb
        self.id = K + self.nb + K
        self.nz = K + self.nb + K + self.nb
        self.d_const = {k: np.sqrt(max(v, 0.0)) for k, v in self.b_fixed.items()}
        self._build_linear(v_max, a_max, lam_max)

    # -- helpers -------------------------------------------------------------
    def _b_entry(self, row, rhs, k, coeff):
        """Add coeff * b_k to a row, folding fixed nodes into the rhs."""
        if k in self.b_fixed:
            rhs -= coeff * self.b_fixed[k]
        else:
            row[self.ib + self.bvar_of_node[k]] += coeff
        return rhs

    def _build_linear(self, v_max, a_max, lam_max):
        K, ds = self.K, self.ds
        rows, h = [], []

        def add(row, rhs):
            if np.max(np.abs(row)) > _EPS_ROW:
                rows.append(row)
                h.append(rhs)
            elif rhs < -1e-9:
                raise Infeasible("constant constraint row violated")

        # velocity: D1[k,ax]^2 b_k <= v_max^2
        for k in range(K + 1):
            for ax in range(3):
                coeff = self.D1[k, ax] ** 2
                if coeff <= _EPS_ROW:
                    continue
                row = np.zeros(self.nz)
                rhs = self._b_entry(row, v_max[ax] ** 2, k, coeff)
                add(row, rhs)

        # acceleration at both endpoints of each interval, using a_k
        for k in range(K):
            for node in (k, k + 1):
                for ax in range(3):
                    for sign in (1.0, -1.0):
                        row = np.zeros(self.nz)
                        row[self.ia + k] = sign * self.D1[node, ax]
                        rhs = self._b_entry(row, a_max[ax], node, sign * self.D2[node, ax])
                        add(row, rhs)

        # acceleration-difference (path jerk) rows between adjacent nodes;
        # node accel uses the interval to its right, the last node interval K-1
        def accel_terms(node):
            a_idx = min(node, K - 1)
            return a_idx, self.D1[node], self.D2[node]

        for k in range(K):
            ai, D1i, D2i = accel_terms(k)
            aj, D1j, D2j = accel_terms(k + 1)
            for ax in range(3):
                for sign in (1.0, -1.0):
                    row = np.zeros(self.nz)
                    row[self.ia + aj] += sign * D1j[ax]
                    row[self.ia + ai] -= sign * D1i[ax]
                    rhs = lam_max[ax] * ds
                    rhs = self._b_entry(row, rhs, k + 1, sign * D2j[ax])
                    rhs = self._b_entry(row, rhs, k, -sign * D2i[ax])
                    add(row, rhs)

        # optional upper caps on individual progress-rate nodes (used to keep
        # a hand-off speed compatible with the next segment's entry curvature)
        for k, cap in self.b_cap.items():
            if k in self.b_fixed:
                if self.b_fixed[k] > cap + 1e-12:
                    raise Infeasible("fixed progress rate exceeds its cap")
                continue
            row = np.zeros(self.nz)
            rhs = self._b_entry(row, float(cap), k, 1.0)
            add(row, rhs)

        self.G = np.array(rows) if rows else np.zeros((0, self.nz))
        self.h = np.array(h)

        # equalities b_{k+1} - b_k - 2 ds a_k = 0
        E = np.zeros((K, self.nz))
        e = np.zeros(K)
        for k in range(K):
            E[k, self.ia + k] = -2.0 * ds
            e[k] = self._b_entry(E[k], e[k], k + 1, 1.0)
            e[k] = self._b_entry(E[k], e[k], k, -1.0)
        self.E, self.e = E, e

        # barrier complexity: lin rows + log b + log d + 2 per cone (two families)
        self.m_eff = self.G.shape[0] + 2 * self.nb + 2 * self.nb + 2 * K

    def d_at(self, z, k):
        if k in self.b_fixed:
            return self.d_const[k]
        return z[self.id + self.bvar_of_node[k]]

    def objective(self, z):
        a = z[self.ia : self.ia + self.K]
        c = z[self.ic : self.ic + self.K]
        return self.rho * self.ds * float(a @ a) + (1.0 - self.rho) * float(np.sum(c))

    def objective_grad(self, z):
        g = np.zeros(self.nz)
        g[self.ia : self.ia + self.K] = 2.0 * self.rho * self.ds * z[self.ia : self.ia + self.K]
        g[self.ic : self.ic + self.K] = 1.0 - self.rho
        return g

    def objective_hess_diag(self):
        d = np.zeros(self.nz)
        d[self.ia : self.ia + self.K] = 2.0 * self.rho * self.ds
        return d

    def barrier(self, z, want_derivs=True):
        """Barrier value/gradient/Hessian; returns None when z leaves the domain."""
        K = self.K
        slack = self.h - self.G @ z if self.G.shape[0] else np.zeros(0)
        if slack.size and np.min(slack) <= 0.0:
            return None
        bv = z[self.ib : self.ib + self.nb]
        dv = z[self.id : self.id + self.nb]
        if self.nb and (np.min(bv) <= 0.0 or np.min(dv) <= 0.0):
            return None
        q_bd = bv - dv ** 2
        if self.nb and np.min(q_bd) <= 0.0:
            return None
        c = z[self.ic : self.ic + self.K]
        vsum = np.array([self.d_at(z, k) + self.d_at(z, k + 1) for k in range(K)])
        q_h = c * vsum - 2.0 * self.ds
        if np.min(q_h) <= 0.0 or np.min(c) <= 0.0:
            return None

        phi = -np.sum(np.log(slack)) if slack.size else 0.0
        phi -= np.sum(np.log(bv)) + np.sum(np.log(dv)) + np.sum(np.log(q_bd)) + np.sum(np.log(q_h))
        if not want_derivs:
            return phi, None, None

        grad = np.zeros(self.nz)
        H = np.zeros((self.nz, self.nz))
        if slack.size:
            inv = 1.0 / slack
            grad += self.G.T @ inv
            H += (self.G.T * (inv ** 2)) @ self.G
        if self.nb:
            sl_b, sl_d = slice(self.ib, self.ib + self.nb), slice(self.id, self.id + self.nb)
            grad[sl_b] += -1.0 / bv
            grad[sl_d] += -1.0 / dv
            ii = np.arange(self.nz)
            H[ii[sl_b], ii[sl_b]] += 1.0 / bv ** 2
            H[ii[sl_d], ii[sl_d]] += 1.0 / dv ** 2
            # -log(b - d^2)
            grad[sl_b] += -1.0 / q_bd
            grad[sl_d] += 2.0 * dv / q_bd
            H[ii[sl_b], ii[sl_b]] += 1.0 / q_bd ** 2
            H[ii[sl_d], ii[sl_d]] += 2.0 / q_bd + 4.0 * dv ** 2 / q_bd ** 2
            H[ii[sl_b], ii[sl_d]] += -2.0 * dv / q_bd ** 2
            H[ii[sl_d], ii[sl_b]] += -2.0 * dv / q_bd ** 2
        # hyperbolic cones -log(c_k (d_k + d_{k+1}) - 2 ds)
        for k in range(K):
            q = q_h[k]
            u = c[k]
            v = vsum[k]
            iu = self.ic + k
            idx_d = [self.id + self.bvar_of_node[kk] for kk in (k, k + 1) if kk not in self.b_fixed]
            grad[iu] += -v / q
            for j in idx_d:
                grad[j] += -u / q
            sigma = 2.0 * self.ds  # = u v - q
            H[iu, iu] += v ** 2 / q ** 2
            for j in idx_d:
                H[iu, j] += sigma / q ** 2
                H[j, iu] += sigma / q ** 2
                for j2 in idx_d:
                    H[j, j2] += u ** 2 / q ** 2
        return phi, grad, H


def _newton_center(prob, z, t, extra_grad=None, max_steps=60, dec_tol=1e-11):
    """Equality-constrained Newton centering of t*f0 + phi at parameter t."""
    E, e = prob.E, prob.e
    me = E.shape[0]
    n_iter = 0
    for _ in range(max_steps):
        out = prob.barrier(z)
        if out is None:
            raise SolverStalled("barrier domain lost during centering")
        phi, gphi, Hphi = out
        g = t * prob.objective_grad(z) + gphi
        if extra_grad is not None:
            g = g + t * extra_grad
        Hdiag = t * prob.objective_hess_diag()
        Hm = Hphi.copy()
        Hm[np.arange(prob.nz), np.arange(prob.nz)] += Hdiag
        KKT = np.zeros((prob.nz + me, prob.nz + me))
        KKT[: prob.nz, : prob.nz] = Hm
        KKT[: prob.nz, prob.nz :] = E.T
        KKT[prob.nz :, : prob.nz] = E
        rhs = np.concatenate([-g, e - E @ z])
        try:
            sol = np.linalg.solve(KKT, rhs)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(KKT, rhs, rcond=None)[0]
        step = sol[: prob.nz]
        w = sol[prob.nz :]
        dec = float(-g @ step - (E @ z - e) @ w)
        n_iter += 1
        if not np.isfinite(dec):
            raise SolverStalled("Newton decrement not finite")
        if dec / 2.0 <= dec_tol:
            return z, w, n_iter
        # backtracking line search on the merit t*f0 + phi
        val0 = t * prob.objective(z) + phi
        alpha = 1.0
        for _ in range(60):
            zn = z + alpha * step
            out_n = prob.barrier(zn, want_derivs=False)
            if out_n is not None:
                if t * prob.objective(zn) + out_n[0] <= val0 - 0.01 * alpha * dec * 0.5:
                    break
            alpha *= 0.5
        else:
            return z, w, n_iter
        z = zn
    return z, w, n_iter


def _initial_profile(prob, v_max, a_max):
    """Conservative strictly feasible (b, a) heuristic via forward/backward caps."""
    K, ds = prob.K, prob.ds
    D1, D2 = prob.D1, prob.D2
    bcap = np.full(K + 1, np.inf)
    for k in range(K + 1):
        for ax in range(3):
            if D1[k, ax] ** 2 > _EPS_ROW:
                bcap[k] = min(bcap[k], v_max[ax] ** 2 / D1[k, ax] ** 2)
            if abs(D2[k, ax]) > _EPS_ROW:
                bcap[k] = min(bcap[k], 0.5 * a_max[ax] / abs(D2[k, ax]))
    finite = bcap[np.isfinite(bcap)]
    fallback = float(np.median(finite)) if finite.size else 1.0
    bcap[~np.isfinite(bcap)] = fallback
    for k, cap in prob.b_cap.items():
        bcap[k] = min(bcap[k], 0.9 * cap)
    target = 0.25 * bcap

    a_ramp = np.inf
    for k in range(K + 1):
        for ax in range(3):
            if abs(D1[k, ax]) > _EPS_ROW:
                a_ramp = min(a_ramp, 0.25 * a_max[ax] / abs(D1[k, ax]))
    if not np.isfinite(a_ramp):
        a_ramp = 1.0

    b = np.empty(K + 1)
    b[0] = prob.b_fixed.get(0, target[0])
    for k in range(K):
        b[k + 1] = min(target[k + 1], b[k] + 2 * ds * a_ramp)
    if K in prob.b_fixed:
        b[K] = prob.b_fixed[K]
    for k in range(K - 1, 0, -1):
        b[k] = min(b[k], b[k + 1] + 2 * ds * a_ramp)
    b[1:K] = np.maximum(b[1:K], 1e-9)
    return b


def _pack(prob, b):
    """Assemble a full variable vector from a consistent b profile."""
    K, ds = prob.K, prob.ds
    z = np.zeros(prob.nz)
    a = (b[1:] - b[:-1]) / (2 * ds)
    z[prob.ia : prob.ia + K] = a
    for i, k in enumerate(prob.b_var_nodes):
        z[prob.ib + i] = b[k]
        z[prob.id + i] = 0.8 * np.sqrt(b[k])
    for k in range(K):
        dsum = prob.d_at(z, k) + prob.d_at(z, k + 1)
        z[prob.ic + k] = 2.0 * (2.0 * ds) / max(dsum, 1e-12)
    return z


def _phase1(prob, b_start, max_newton=400):
    """Barrier phase-1 over the (a, b) subspace.

    Minimizes the worst linear violation theta subject to the consistency
    equalities and b > 0.  The cone variables (c, d) never enter the linear
    rows, so they are rebuilt afterwards from the feasible b profile; keeping
    them out of phase-1 removes their objective-free unbounded directions.
    Returns a strictly feasible b profile or raises ``Infeasible``.
    """
    K = prob.K
    nr = K + prob.nb  # reduced variables: a | b_var
    idx = list(range(prob.ia, prob.ia + K)) + list(range(prob.ib, prob.ib + prob.nb))
    G = prob.G[:, idx]
    E = prob.E[:, idx]
    h, e = prob.h, prob.e
    me = E.shape[0]
    if not G.shape[0]:
        return b_start

    x = np.concatenate([(b_start[1:] - b_start[:-1]) / (2 * prob.ds),
                        [b_start[k] for k in prob.b_var_nodes]])
    sl_b = slice(K, nr)
    rr = np.arange(nr)
    theta = float(np.max(G @ x - h)) * 1.5 + 1e-2
    t = 1.0
    total = 0
    scale = max(1.0, float(np.max(np.abs(h))))
    best = None
    while t < 1e12:
        for _inner in range(80):
            slack = theta + (h - G @ x)
            bv = x[sl_b]
            if np.min(slack) <= 0 or (prob.nb and np.min(bv) <= 0):
                raise SolverStalled("phase-1 iterate left its domain")
            inv = 1.0 / slack
            g_x = G.T @ inv
            g_x[sl_b] += -1.0 / bv
            g_th = t - float(np.sum(inv))
            H_xx = (G.T * inv ** 2) @ G
            H_xx[rr[sl_b], rr[sl_b]] += 1.0 / bv ** 2
            H_xx[rr, rr] += 1e-10 * max(1.0, t)
            H_xth = -G.T @ (inv ** 2)
            H_thth = float(np.sum(inv ** 2)) + 1e-10 * max(1.0, t)
            KKT = np.zeros((nr + 1 + me, nr + 1 + me))
            KKT[:nr, :nr] = H_xx
            KKT[:nr, nr] = H_xth
            KKT[nr, :nr] = H_xth
            KKT[nr, nr] = H_thth
            KKT[:nr, nr + 1 :] = E.T
            KKT[nr + 1 :, :nr] = E
            rhs = np.concatenate([-g_x, [-g_th], e - E @ x])
            try:
                sol = np.linalg.solve(KKT, rhs)
            except np.linalg.LinAlgError:
                sol = np.linalg.lstsq(KKT, rhs, rcond=None)[0]
            dx, dth = sol[:nr], sol[nr]
            dec = float(-g_x @ dx - g_th * dth)
            total += 1
            if total > max_newton:
                break
            if not np.isfinite(dec) or dec / 2.0 <= 1e-10 * max(1.0, t):
                break
            alpha = 1.0
            for _ in range(60):
                xn, thn = x + alpha * dx, theta + alpha * dth
                if (np.min(thn + (h - G @ xn)) > 0
                        and (not prob.nb or np.min(xn[sl_b]) > 0)):
                    break
                alpha *= 0.5
            else:
                break
            x, theta = xn, thn
            feas = h - G @ x
            if np.min(feas) > 1e-9 * scale:
                margin = float(np.min(feas))
                if best is None or margin > best[0]:
                    best = (margin, x.copy())
                if margin > 1e-6 * scale:
                    break
        if best is not None and best[0] > 1e-6 * scale:
            break
        if total > max_newton:
            break
        t *= 10.0
    if best is None:
        raise Infeasible(
            f"no strictly feasible time profile (worst violation {theta:.3e})"
        )
    x = best[1]
    b = np.empty(K + 1)
    for k in range(K + 1):
        b[k] = prob.b_fixed[k] if k in prob.b_fixed else x[K + prob.bvar_of_node[k]]
    return b


def _constraint_columns(prob, z):
    """Gradient columns and values of every inequality written as q_i(z) > 0.

    The stationarity condition uses the constraint form -q_i <= 0, so the
    column stored for row i is -grad q_i.  Order: linear rows, b positivity,
    d positivity, b - d^2 cones, hyperbolic cones.
    """
    K = prob.K
    cols, qs = [], []
    if prob.G.shape[0]:
        slack = prob.h - prob.G @ z
        for i in range(prob.G.shape[0]):
            cols.append(prob.G[i])
            qs.append(slack[i])
    for i in range(prob.nb):
        col = np.zeros(prob.nz)
        col[prob.ib + i] = -1.0
        cols.append(col)
        qs.append(z[prob.ib + i])
    for i in range(prob.nb):
        col = np.zeros(prob.nz)
        col[prob.id + i] = -1.0
        cols.append(col)
        qs.append(z[prob.id + i])
    for i in range(prob.nb):
        col = np.zeros(prob.nz)
        col[prob.ib + i] = -1.0
        col[prob.id + i] = 2.0 * z[prob.id + i]
        cols.append(col)
        qs.append(z[prob.ib + i] - z[prob.id + i] ** 2)
    for k in range(K):
        u = z[prob.ic + k]
        v = prob.d_at(z, k) + prob.d_at(z, k + 1)
        col = np.zeros(prob.nz)
        col[prob.ic + k] = -v
        for kk in (k, k + 1):
            if kk not in prob.b_fixed:
                col[prob.id + prob.bvar_of_node[kk]] = -u
        cols.append(col)
        qs.append(u * v - 2.0 * prob.ds)
    return np.array(cols).T, np.array(qs)


def _polish_duals(prob, z, t, w):
    """Least-squares refit of the multipliers at the final central point.

    The barrier multipliers lambda_i = 1/(t q_i) satisfy stationarity only up
    to the centering residual divided by t; refitting the near-active ones by
    least squares (stationarity is linear in the duals) tightens the reported
    residual without moving the primal point.
    """
    J, q = _constraint_columns(prob, z)
    lam = 1.0 / (t * q)
    nu = w / t
    r = prob.objective_grad(z) + J @ lam + prob.E.T @ nu
    active = lam > 1e-7 * max(1.0, lam.max())
    A = np.hstack([J[:, active], prob.E.T])
    delta = np.linalg.lstsq(A, -r, rcond=None)[0]
    na = int(np.sum(active))
    lam[active] = np.maximum(lam[active] + delta[:na], 0.0)
    nu = nu + delta[na:]
    r = prob.objective_grad(z) + J @ lam + prob.E.T @ nu
    return float(np.max(np.abs(r))), lam, nu


def solve_time_allocation(
    D1: np.ndarray,
    D2: np.ndarray,
    rho: float,
    v_max: np.ndarray,
    a_max: np.ndarray,
    lambda_max: np.ndarray,
    b0: float,
    bK: float | None,
    gap_tol: float = 1e-9,
    max_newton: int = 200,
    bK_max: float | None = None,
) -> TimeProfile:
    """Solve the time allocation for path derivatives sampled on the grid.

    Parameters
    ----------
    D1, D2 : (K+1, 3) arrays
        First and second s-derivatives of the path at the grid nodes.
    b0, bK : floats
        Boundary squared progress rates; ``bK=None`` leaves the terminal
        rate free.
    bK_max : float, optional
        Upper bound on the terminal progress rate when it is left free,
        used to keep a hand-off speed compatible with what the next
        segment can absorb.
    """
    D1 = np.asarray(D1, dtype=float)
    D2 = np.asarray(D2, dtype=float)
    K = D1.shape[0] - 1
    if K < 2:
        raise ValueError("need at least 2 grid intervals")
    v_max = np.broadcast_to(np.asarray(v_max, dtype=float), (3,)).copy()
    a_max = np.broadcast_to(np.asarray(a_max, dtype=float), (3,)).copy()
    lambda_max = np.broadcast_to(np.asarray(lambda_max, dtype=float), (3,)).copy()
    if np.any(v_max <= 0) or np.any(a_max <= 0) or np.any(lambda_max < 0):
        raise ValueError("v_max, a_max must be positive and lambda_max nonnegative")
    lambda_max = np.where(np.isfinite(lambda_max) & (lambda_max > 0), lambda_max, np.inf)
    if not (0.0 <= rho <= 1.0):
        raise ValueError("rho must lie in [0, 1]")
    rho = min(max(rho, 1e-9), 1.0 - 1e-9)

    b_fixed = {0: float(b0)}
    if bK is not None:
        b_fixed[K] = float(bK)
    # fixed-node feasibility of the velocity rows
    for k, bf in b_fixed.items():
        for ax in range(3):
            if D1[k, ax] ** 2 * bf > v_max[ax] ** 2 + 1e-9:
                raise Infeasible(
                    f"boundary speed on axis {ax} exceeds v_max at node {k}"
                )

    # infinite lambda entries: drop rows by zeroing via huge bound
    lam_rows = np.where(np.isfinite(lambda_max), lambda_max, 1e12)
    b_cap = {}
    if bK_max is not None and np.isfinite(bK_max):
        if bK_max <= 0:
            raise ValueError("bK_max must be positive")
        b_cap[K] = float(bK_max)
    prob = _Problem(D1, D2, rho, v_max, a_max, lam_rows, b_fixed, K, b_cap=b_cap)

    b_init = _initial_profile(prob, v_max, a_max)
    z = None
    base_end = b_fixed.get(K, float(b_init[0] if 0 in b_fixed else b_init[-1]))
    if K in prob.b_cap:
        base_end = min(base_end, 0.9 * prob.b_cap[K])
    base = np.linspace(b_fixed.get(0, b_init[0]), base_end, K + 1)
    for halvings in range(34):
        sigma = 0.5 ** halvings
        b_try = base + sigma * (b_init - base)
        b_try[0] = b_fixed.get(0, b_try[0])
        if K in b_fixed:
            b_try[K] = b_fixed[K]
        if np.any(b_try[1:K] <= 0):
            continue
        z_try = _pack(prob, b_try)
        if prob.barrier(z_try, want_derivs=False) is not None:
            z = z_try
            break
    if z is None:
        b_feas = _phase1(prob, np.maximum(b_init, 1e-9))
        z = _pack(prob, b_feas)
        if prob.barrier(z, want_derivs=False) is None:
            raise Infeasible("could not construct an interior point")

    t = 1.0
    t_final = prob.m_eff / gap_tol
    total_newton = 0
    w = np.zeros(prob.E.shape[0])
    while True:
        z, w, used = _newton_center(prob, z, t, dec_tol=1e-13 if t >= t_final else 1e-9)
        total_newton += used
        if total_newton > max_newton * 10:
            raise SolverStalled("Newton iteration cap exceeded")
        if t >= t_final:
            break
        t = min(t * 12.0, t_final)

    gap = prob.m_eff / t
    kkt, _lam, _nu = _polish_duals(prob, z, t, w)

    b = np.empty(K + 1)
    for k in range(K + 1):
        b[k] = b_fixed[k] if k in b_fixed else z[prob.ib + prob.bvar_of_node[k]]
    a = z[prob.ia : prob.ia + K].copy()
    s_grid = np.linspace(0.0, 1.0, K + 1)
    T = profile_time(b, prob.ds)
    diag = {
        "duality_gap": gap,
        "kkt_residual": kkt,
        "newton_iterations": total_newton,
        "objective": prob.objective(z),
        "status": "optimal",
    }
    return TimeProfile(s_grid, b, a, T, diag)
