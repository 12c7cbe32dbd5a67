"""Dense active-set solver for convex quadratic programs.

Solves ``min 0.5 x^T P x + q^T x`` subject to ``A x = b`` and ``G x <= h``
with a primal active-set iteration.  Each working-set subproblem is solved in
the nullspace of the stacked constraints: the reduced Hessian is symmetric, so
an eigenvalue cutoff separates genuine curvature from roundoff even when the
curvature spread is many orders of magnitude, and semidefinite ``P`` reduces
to a minimum-norm step in the flat directions.  Multipliers are recovered from
the stationarity equation at each working-set minimizer.  Problem sizes in
this package are tiny (tens of variables, a handful of inequalities), so the
dense SVD/eigendecomposition per iteration is the cheapest robust choice.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import Infeasible, RankDeficient, SolverStalled


@dataclass
class QPResult:
    x: np.ndarray
    eq_duals: np.ndarray
    ineq_duals: np.ndarray
    active_set: list = field(default_factory=list)
    iterations: int = 0
    objective: float = 0.0


def kkt_residual(P, q, A, b, G, h, x, nu, lam) -> dict:
    """First-order optimality residuals of a candidate primal-dual solution."""
    g_stat = P @ x + q
    if A is not None and A.size:
        g_stat = g_stat + A.T @ nu
    comp = 0.0
    primal_ineq = 0.0
    dual = 0.0
    if G is not None and G.size:
        g_stat = g_stat + G.T @ lam
        slack = h - G @ x
        primal_ineq = float(max(0.0, np.max(-slack)))
        comp = float(np.max(np.abs(lam * slack)))
        dual = float(max(0.0, np.max(-lam)))
    primal_eq = float(np.max(np.abs(A @ x - b))) if A is not None and A.size else 0.0
    return {
        "stationarity": float(np.max(np.abs(g_stat))),
        "primal_eq": primal_eq,
        "primal_ineq": primal_ineq,
        "complementarity": comp,
        "dual_feasibility": dual,
    }


def _reduce_equalities(A, b, tol):
    """Drop linearly dependent equality rows; raise Infeasible if inconsistent.

    Uses the SVD: rows are projected onto the leading left singular vectors.
    Returns a full-row-rank system equivalent to the input.
    """
    if A is None or A.shape[0] == 0:
        return np.zeros((0, A.shape[1] if A is not None else 0)), np.zeros(0)
    U, sv, Vt = np.linalg.svd(A, full_matrices=True)
    scale = sv[0] if sv.size and sv[0] > 0 else 1.0
    rank = int(np.sum(sv > tol * scale))
    if rank == A.shape[0]:
        A_r, b_r = A, b
    else:
        A_r = U[:, :rank].T @ A
        b_r = U[:, :rank].T @ b
        # consistency of the dropped rows
        x_ln = np.linalg.lstsq(A, b, rcond=None)[0]
        if np.max(np.abs(A @ x_ln - b)) > 1e-8 * max(1.0, float(np.max(np.abs(b)))):
            raise Infeasible("equality constraints are inconsistent")
    if rank > A.shape[1]:
        raise RankDeficient("more independent equality constraints than variables")
    return A_r, b_r


def _min_norm(A, b):
    return np.linalg.lstsq(A, b, rcond=None)[0] if A.shape[0] else np.zeros(A.shape[1])


def solve_qp(P, q, A=None, b=None, G=None, h=None, tol: float = 1e-10, max_iter: int = 200) -> QPResult:
    """Solve a convex QP with a primal active-set method.

    Ties when choosing a blocking constraint or a constraint to drop are
    broken by the lowest row index, which makes the iteration deterministic.

    Raises
    ------
    Infeasible
        If the combined constraint set is empty.
    SolverStalled
        If the iteration cap is reached (does not occur on well-posed inputs).
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    q = np.zeros(n) if q is None else np.asarray(q, dtype=float)
    A = np.zeros((0, n)) if A is None else np.atleast_2d(np.asarray(A, dtype=float))
    b = np.zeros(0) if b is None else np.atleast_1d(np.asarray(b, dtype=float))
    G = np.zeros((0, n)) if G is None else np.atleast_2d(np.asarray(G, dtype=float))
    h = np.zeros(0) if h is None else np.atleast_1d(np.asarray(h, dtype=float))
    m_ineq = G.shape[0]

    # normalize scales: objective to unit magnitude, inequality rows to unit
    # norm, so that the KKT least-squares cutoff is meaningful
    P_orig, q_orig = P, q
    obj_scale = max(1.0, float(np.max(np.abs(P))), float(np.max(np.abs(q), initial=0.0)))
    P = P / obj_scale
    q = q / obj_scale
    row_scale = np.ones(m_ineq)
    if m_ineq:
        norms = np.linalg.norm(G, axis=1)
        for i in range(m_ineq):
            if norms[i] < 1e-14:
                if h[i] < -1e-12:
                    raise Infeasible("zero inequality row with negative bound")
                norms[i] = 1.0
        row_scale = norms
        G = G / norms[:, None]
        h = h / norms
    feas_tol = 1e-9 * max(1.0, float(np.max(np.abs(h))) if h.size else 1.0)

    A_r, b_r = _reduce_equalities(A, b, tol=1e-12)

    # --- phase 1: pin violated inequalities as equalities until feasible ---
    x = _min_norm(A_r, b_r)
    pinned: list[int] = []
    for _ in range(m_ineq + 1):
        viol = G @ x - h if m_ineq else np.zeros(0)
        if not viol.size or np.max(viol) <= feas_tol:
            break
        worst = int(np.argmax(viol))
        if worst in pinned:
            raise Infeasible("could not restore feasibility of the inequality set")
        pinned.append(worst)
        A_aug = np.vstack([A_r, G[pinned]])
        b_aug = np.concatenate([b_r, h[pinned]])
        x = _min_norm(A_aug, b_aug)
        if np.max(np.abs(A_aug @ x - b_aug)) > 1e-7 * max(1.0, float(np.max(np.abs(b_aug)))):
            raise Infeasible("equality and pinned inequality constraints conflict")
    else:
        raise Infeasible("phase-1 feasibility restoration failed")
    if A_r.shape[0] and np.max(np.abs(A_r @ x - b_r)) > 1e-7 * max(1.0, float(np.max(np.abs(b_r))) or 1.0):
        raise Infeasible("equality constraints unsatisfiable")

    working = sorted(pinned)
    # normalize the (full-row-rank) equality rows so that rank decisions on
    # the stacked working-set matrix treat every row on the same footing
    if A_r.shape[0]:
        eq_norms = np.linalg.norm(A_r, axis=1)
        eq_norms[eq_norms < 1e-14] = 1.0
        A_r = A_r / eq_norms[:, None]
        b_r = b_r / eq_norms
    me = A_r.shape[0]
    eps = np.finfo(float).eps

    for it in range(1, max_iter + 1):
        GW = G[working] if working else np.zeros((0, n))
        nW = len(working)

        # Step to the minimizer over the working-set affine subspace, computed
        # in the nullspace of the stacked constraints.  The reduced Hessian is
        # symmetric, so genuine curvature separates from roundoff through an
        # eigenvalue cutoff; a saddle-form solve cannot make that distinction
        # and either inverts noise directions or truncates real ones when the
        # curvature spread is wide.
        C = np.vstack([A_r, GW]) if (me + nW) else np.zeros((0, n))
        if C.shape[0]:
            sv, Vt = np.linalg.svd(C)[1:]
            rank = int(np.sum(sv > max(C.shape) * eps * (sv[0] if sv.size else 0.0)))
            Z = Vt[rank:].T
        else:
            Z = np.eye(n)
        if Z.shape[1]:
            Hr = Z.T @ P @ Z
            Hr = 0.5 * (Hr + Hr.T)
            gr = Z.T @ (P @ x + q)
            w_eig, V = np.linalg.eigh(Hr)
            keep = w_eig > 1e-10 * max(float(w_eig[-1]) if w_eig.size else 0.0, 1e-30)
            y = np.zeros_like(gr)
            if np.any(keep):
                y = -V[:, keep] @ ((V[:, keep].T @ gr) / w_eig[keep])
            step = Z @ y
        else:
            step = np.zeros(n)

        # largest feasible step along `step`; ties broken by lowest row index
        alpha = 1.0
        blocking = -1
        smax = float(np.max(np.abs(step), initial=0.0))
        for i in range(m_ineq):
            if i in working:
                continue
            gi_p = float(G[i] @ step)
            if gi_p > tol * max(1.0, smax):
                ai = float(h[i] - G[i] @ x) / gi_p
                if ai < alpha - 1e-12:
                    alpha, blocking = ai, i
        x = x + max(alpha, 0.0) * step
        if blocking >= 0:
            working = sorted(working + [blocking])
            continue

        # Full step taken: x is the minimizer over the current working set.
        # One refinement pass on the same reduced system scrubs the roundoff
        # left by the first solve before the multipliers are evaluated.
        if Z.shape[1] and np.any(keep):
            gr = Z.T @ (P @ x + q)
            x = x - Z @ (V[:, keep] @ ((V[:, keep].T @ gr) / w_eig[keep]))

        # Multipliers follow from a well-conditioned least squares on the
        # stationarity equation (constraint rows all have unit norm).
        J = np.vstack([A_r, GW]).T if (me + nW) else np.zeros((n, 0))
        duals = np.linalg.lstsq(J, -(P @ x + q), rcond=None)[0] if J.shape[1] else np.zeros(0)
        nu_r = duals[:me]
        lam_w = duals[me:]
        lam_floor = -1e-10 * max(1.0, float(np.max(np.abs(lam_w), initial=0.0)))
        if nW == 0 or float(np.min(lam_w)) >= lam_floor:
            lam = np.zeros(m_ineq)
            for i, idx in enumerate(working):
                lam[idx] = max(float(lam_w[i]), 0.0) * obj_scale / row_scale[idx]
            # map the reduced-system equality duals back onto the original
            # (possibly redundant) rows; the target is in range(A^T), so the
            # least-squares system is consistent
            if A.shape[0]:
                target = obj_scale * (A_r.T @ nu_r) if me else np.zeros(n)
                nu_full = np.linalg.lstsq(A.T, target, rcond=None)[0]
            else:
                nu_full = np.zeros(0)
            obj = 0.5 * float(x @ P_orig @ x) + float(q_orig @ x)
            return QPResult(x, nu_full, lam, list(working), it, obj)
        # drop the most negative multiplier, lowest index on ties
        k = int(np.lexsort((working, lam_w))[0])
        working.pop(k)

    raise SolverStalled(f"active-set iteration cap {max_iter} reached")
