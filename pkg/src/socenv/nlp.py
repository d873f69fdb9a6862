"""Dense SQP solver with an active-set QP subsolver.

Targets small NLPs (tens to a few hundred variables) with smooth nonlinear
equality constraints, two-sided linear inequalities ``lo <= A z <= hi`` and
optional nonlinear inequalities ``t(z) <= 0``.  The Hessian is a Powell-damped
BFGS approximation, globalized by a backtracking line search on an l1
exact-penalty merit function whose penalty is kept above the largest
multiplier estimate.  Everything is deterministic: fixed pivoting rules, no
randomness.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .transcription import NlpProblem

_ACTIVE_TOL = 1e-10


@dataclass
class SqpOptions:
    max_iters: int = 200
    eq_tol: float = 1e-8
    kkt_tol: float = 1e-6
    penalty_growth: float = 2.0
    fd_step: float = 1e-6
    ls_backtrack: float = 0.5
    ls_armijo: float = 1e-4
    max_backtracks: int = 30
    h0: float = 1.0
    gn_floor: float = 1e-2   # eigenvalue floor applied to a supplied objective Hessian
    record_iterates: bool = False
    verbose: bool = False

    def __post_init__(self):
        if not 0.0 < self.ls_backtrack < 1.0:
            raise ValueError("backtracking factor must lie in (0, 1)")
        for name in ("eq_tol", "kkt_tol", "fd_step", "ls_armijo", "penalty_growth", "h0"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class SolveReport:
    status: str
    iterations: int
    objective: float
    max_eq_residual: float
    max_ineq_violation: float
    wall_time: float
    relaxed_qp_steps: int = 0
    iterates: Optional[list] = None


@dataclass
class QpResult:
    d: np.ndarray
    lam_eq: np.ndarray
    mu: np.ndarray          # signed multiplier per inequality row (0 if inactive)
    active_set: list        # list of (row, side) with side -1 (lower) / +1 (upper)
    status: str             # "optimal" | "cycle" | "infeasible"
    iterations: int


def fd_jacobian(fun, z, step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian, column by column."""
    if step <= 0:
        raise ValueError("step must be positive")
    z = np.asarray(z, dtype=float)
    f0 = np.atleast_1d(fun(z))
    J = np.empty((f0.size, z.size))
    for j in range(z.size):
        e = np.zeros(z.size)
        e[j] = step
        J[:, j] = (np.atleast_1d(fun(z + e)) - np.atleast_1d(fun(z - e))) / (2.0 * step)
    return J


def fd_gradient(fun, z, step: float = 1e-6) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    g = np.empty(z.size)
    for j in range(z.size):
        e = np.zeros(z.size)
        e[j] = step
        g[j] = (fun(z + e) - fun(z - e)) / (2.0 * step)
    return g


def qp_active_set(H, g, A_eq=None, b_eq=None, A_ineq=None, lo=None, hi=None,
                  warm_active=None, max_iter: Optional[int] = None) -> QpResult:
    """Solve min 1/2 d'Hd + g'd  s.t.  A_eq d = b_eq,  lo <= A_ineq d <= hi.

    H must be symmetric positive definite.  Dual active-set iterations
    (Goldfarb-Idnani): start from the equality-constrained minimum, repeatedly
    add the most violated inequality side with full or partial dual steps,
    dropping blocking constraints as needed.  Dense factorizations throughout;
    deterministic tie-breaking by lowest constraint index.  ``warm_active`` is
    accepted for API symmetry but ignored (the dual method needs no phase-1
    and cold-solves are cheap at these sizes).
    """
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    n = g.size
    if A_eq is None or len(A_eq) == 0:
        A_eq = np.zeros((0, n))
        b_eq = np.zeros(0)
    else:
        A_eq = np.atleast_2d(np.asarray(A_eq, dtype=float))
        b_eq = np.atleast_1d(np.asarray(b_eq, dtype=float))
    if A_ineq is None or len(A_ineq) == 0:
        A_ineq = np.zeros((0, n))
        lo = np.zeros(0)
        hi = np.zeros(0)
    else:
        A_ineq = np.atleast_2d(np.asarray(A_ineq, dtype=float))
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
    m = A_ineq.shape[0]
    n_eq = A_eq.shape[0]
    if max_iter is None:
        max_iter = 50 + 10 * (n + 2 * m)

    from scipy.linalg import cho_factor, cho_solve
    diag_scale = max(1.0, float(np.max(np.abs(np.diag(H)))))
    shift = 0.0
    while True:
        try:
            chol = cho_factor(H + shift * np.eye(n) if shift else H)
            break
        except np.linalg.LinAlgError:
            shift = max(2.0 * shift, 1e-10 * diag_scale)
            if shift > 1e6 * diag_scale:
                raise ValueError("QP Hessian could not be regularized")

    def hsolve(v):
        return cho_solve(chol, v)

    scale_b = max(1.0,
                  float(np.max(np.abs(b_eq), initial=0.0)),
                  float(np.max(np.abs(lo[np.isfinite(lo)]), initial=0.0)),
                  float(np.max(np.abs(hi[np.isfinite(hi)]), initial=0.0)))
    feas_tol = 1e-9 * scale_b

    # Constraints in the form normal @ x >= rhs; equality rows first.
    # Inequality sides are tagged (row, side) with side -1 (lower) / +1 (upper).
    x = -hsolve(g)
    active: list = []       # constraint ids: ("eq", i) or (row, side)
    u: list = []            # multipliers aligned with active (>= 0 for sides)
    ginv_cols: list = []    # cached H^{-1} @ normal per active constraint
    normals: list = []
    it_count = 0

    def directions(nrm):
        gn = hsolve(nrm)
        if not active:
            return gn, np.zeros(0)
        Ng = np.column_stack(ginv_cols)
        Nmat = np.column_stack(normals)
        Mred = Nmat.T @ Ng
        try:
            r = np.linalg.solve(Mred, Ng.T @ nrm)
        except np.linalg.LinAlgError:
            r, *_ = np.linalg.lstsq(Mred, Ng.T @ nrm, rcond=None)
        return gn - Ng @ r, r

    def add_constraint(cid, nrm, rhs, is_eq):
        nonlocal x, it_count
        u_new = 0.0
        while True:
            it_count += 1
            if it_count > max_iter:
                return "cycle"
            z, r = directions(nrm)
            resid = rhs - float(nrm @ x)
            curv = float(nrm @ z)            # = |proj of nrm|^2 in the H metric
            curv_full = float(nrm @ hsolve(nrm))
            if not np.isfinite(curv) or not np.isfinite(resid):
                return "cycle"
            if curv <= 1e-12 * max(curv_full, 1e-300):
                # Normal linearly dependent on the active set.
                blockers = [(u[k] / r[k], k) for k in range(len(active))
                            if active[k][0] != "eq" and r[k] > _ACTIVE_TOL]
                if not blockers:
                    if abs(resid) <= feas_tol:
                        return "redundant"
                    return "infeasible"
                t, k_drop = min(blockers, key=lambda p: (p[0], p[1]))
                for k in range(len(active)):
                    u[k] -= t * r[k]
                u_new += t
                active.pop(k_drop)
                u.pop(k_drop)
                ginv_cols.pop(k_drop)
                normals.pop(k_drop)
                continue
            t1 = resid / curv
            if is_eq:
                t = t1   # equalities are added before any side is active
            else:
                blockers = [(u[k] / r[k], k) for k in range(len(active))
                            if active[k][0] != "eq" and r[k] > _ACTIVE_TOL]
                t2, k_drop = min(blockers, key=lambda p: (p[0], p[1])) if blockers \
                    else (np.inf, -1)
                t = min(t1, t2)
            x = x + t * z
            for k in range(len(active)):
                u[k] -= t * r[k]
            u_new += t
            if (not is_eq) and t < t1 - 1e-300 and t == t2:
                active.pop(k_drop)
                u.pop(k_drop)
                ginv_cols.pop(k_drop)
                normals.pop(k_drop)
                continue
            active.append(cid)
            u.append(u_new)
            normals.append(nrm)
            ginv_cols.append(hsolve(nrm))
            return "added"

    for i in range(n_eq):
        res = add_constraint(("eq", i), A_eq[i], b_eq[i], True)
        if res in ("infeasible", "cycle"):
            return QpResult(x, np.zeros(n_eq), np.zeros(m), [], res, it_count)

    status = "optimal"
    while True:
        if m:
            r_all = A_ineq @ x
            v_lo = lo - r_all
            v_hi = r_all - hi
            v_lo[~np.isfinite(lo)] = -np.inf
            v_hi[~np.isfinite(hi)] = -np.inf
            for cid in active:
                if cid[0] != "eq":
                    row, side = cid
                    if side < 0:
                        v_lo[row] = -np.inf
                    else:
                        v_hi[row] = -np.inf
            i_lo = int(np.argmax(v_lo))
            i_hi = int(np.argmax(v_hi))
            worst = max(v_lo[i_lo], v_hi[i_hi])
            if worst <= feas_tol:
                break
            if v_lo[i_lo] >= v_hi[i_hi]:
                cid, nrm, rhs = (i_lo, -1), A_ineq[i_lo].copy(), lo[i_lo]
            else:
                cid, nrm, rhs = (i_hi, +1), -A_ineq[i_hi], -hi[i_hi]
            res = add_constraint(cid, nrm, rhs, False)
            if res in ("infeasible", "cycle"):
                status = res
                break
        else:
            break
        if it_count > max_iter:
            status = "cycle"
            break

    lam = np.zeros(n_eq)
    nu_full = np.zeros(m)
    for cid, mult in zip(active, u):
        if cid[0] == "eq":
            lam[cid[1]] = -mult
        else:
            row, side = cid
            nu_full[row] = side * mult
    active_sides = [cid for cid in active if cid[0] != "eq"]
    return QpResult(x, lam, nu_full, active_sides, status, it_count)


def _linear_violation(A, lo, hi, z):
    if A.shape[0] == 0:
        return np.zeros(0)
    r = A @ z
    return np.maximum(np.maximum(r - hi, lo - r), 0.0)


def _merit(f, c_eq, lin_viol, t_vals, sigma):
    total = float(np.sum(np.abs(c_eq))) + float(np.sum(lin_viol))
    if t_vals is not None:
        total += float(np.sum(np.maximum(t_vals, 0.0)))
    return f + sigma * total


def kkt_certificate(nlp: NlpProblem, z, lam_eq, mu_lin, mu_nl=None,
                    fd_step: float = 1e-6) -> dict:
    """Independently recompute stationarity, feasibility and complementarity.

    Deliberately separate from the solver loop; uses the problem callbacks
    directly so a converged report can be audited.
    """
    z = np.asarray(z, dtype=float)
    g = nlp.gradient(z) if nlp.gradient is not None else fd_gradient(nlp.objective, z, fd_step)
    c = np.atleast_1d(nlp.eq_fun(z))
    J = nlp.eq_jac(z) if nlp.eq_jac is not None else fd_jacobian(nlp.eq_fun, z, fd_step)
    r = g + J.T @ np.asarray(lam_eq, dtype=float)
    lin_viol = _linear_violation(nlp.A_ineq, nlp.ineq_lower, nlp.ineq_upper, z)
    compl = 0.0
    if nlp.A_ineq.shape[0]:
        mu_lin = np.asarray(mu_lin, dtype=float)
        r = r + nlp.A_ineq.T @ mu_lin
        vals = nlp.A_ineq @ z
        for j in range(nlp.A_ineq.shape[0]):
            if mu_lin[j] > 0 and np.isfinite(nlp.ineq_upper[j]):
                compl = max(compl, mu_lin[j] * abs(nlp.ineq_upper[j] - vals[j]))
            elif mu_lin[j] < 0 and np.isfinite(nlp.ineq_lower[j]):
                compl = max(compl, -mu_lin[j] * abs(vals[j] - nlp.ineq_lower[j]))
    t_viol = 0.0
    if nlp.ineq_fun is not None:
        t = np.atleast_1d(nlp.ineq_fun(z))
        t_viol = float(np.max(np.maximum(t, 0.0), initial=0.0))
        if mu_nl is not None and np.asarray(mu_nl).size:
            Jt = (nlp.ineq_jac(z) if nlp.ineq_jac is not None
                  else fd_jacobian(nlp.ineq_fun, z, fd_step))
            r = r + Jt.T @ np.asarray(mu_nl, dtype=float)
            compl = max(compl, float(np.max(np.abs(np.asarray(mu_nl) * t), initial=0.0)))
    return {
        "stationarity": float(np.max(np.abs(r), initial=0.0)),
        "eq_residual": float(np.max(np.abs(c), initial=0.0)),
        "ineq_violation": max(float(np.max(lin_viol, initial=0.0)), t_viol),
        "complementarity": compl,
    }


def solve_sqp(nlp: NlpProblem, z0, opts: Optional[SqpOptions] = None):
    """Solve the NLP from z0; returns (z, SolveReport).

    The report also exposes the final multiplier estimates as attributes
    ``lam_eq``, ``mu_lin`` and ``mu_nl`` for certificate checks.
    """
    opts = opts or SqpOptions()
    t_start = time.perf_counter()
    z = np.asarray(z0, dtype=float).copy()
    if z.shape != (nlp.n_vars,):
        raise ValueError(f"z0 has shape {z.shape}, expected ({nlp.n_vars},)")
    n = nlp.n_vars

    grad = nlp.gradient or (lambda v: fd_gradient(nlp.objective, v, opts.fd_step))
    eq_jac = nlp.eq_jac or (lambda v: fd_jacobian(nlp.eq_fun, v, opts.fd_step))
    has_nl = nlp.ineq_fun is not None
    nl_jac = None
    if has_nl:
        nl_jac = nlp.ineq_jac or (lambda v: fd_jacobian(nlp.ineq_fun, v, opts.fd_step))

    f = nlp.objective(z)
    g = grad(z)
    c = np.atleast_1d(nlp.eq_fun(z))
    J = eq_jac(z)
    t_vals = np.atleast_1d(nlp.ineq_fun(z)) if has_nl else None
    Jt = nl_jac(z) if has_nl else None

    use_gn = nlp.hessian is not None

    def gn_hessian(zz):
        Hm = np.asarray(nlp.hessian(zz), dtype=float)
        Hm = 0.5 * (Hm + Hm.T)
        wv, Vv = np.linalg.eigh(Hm)
        return (Vv * np.maximum(wv, opts.gn_floor)) @ Vv.T

    B = gn_hessian(z) if use_gn else opts.h0 * np.eye(n)
    sigma = 1.0
    lam = np.zeros(c.size)
    nu_lin = np.zeros(nlp.A_ineq.shape[0])
    nu_nl = np.zeros(t_vals.size) if has_nl else np.zeros(0)
    relaxed = 0
    warm = None
    iterates = [z.copy()] if opts.record_iterates else None
    status = "max_iters"
    iters_done = 0
    did_reset = False

    def feasibility(zz, cc, tt):
        viol = float(np.max(np.abs(cc), initial=0.0))
        lv = _linear_violation(nlp.A_ineq, nlp.ineq_lower, nlp.ineq_upper, zz)
        viol = max(viol, float(np.max(lv, initial=0.0)))
        if tt is not None:
            viol = max(viol, float(np.max(np.maximum(tt, 0.0), initial=0.0)))
        return viol

    def stationarity(gg, JJ, JJt):
        r = gg + JJ.T @ lam
        if nu_lin.size:
            r = r + nlp.A_ineq.T @ nu_lin
        if has_nl and nu_nl.size:
            r = r + JJt.T @ nu_nl
        return float(np.max(np.abs(r), initial=0.0))

    for it in range(1, opts.max_iters + 1):
        iters_done = it

        feas = feasibility(z, c, t_vals)
        if it > 1 and feas <= opts.eq_tol and stationarity(g, J, Jt) <= opts.kkt_tol:
            status = "converged"
            iters_done = it - 1
            break

        # Assemble the QP in the step d: linear rows are shifted to the
        # current point, nonlinear inequalities are linearized.
        if has_nl:
            A_all = np.vstack([nlp.A_ineq, Jt])
            lo_all = np.concatenate([nlp.ineq_lower - nlp.A_ineq @ z,
                                     np.full(t_vals.size, -np.inf)])
            hi_all = np.concatenate([nlp.ineq_upper - nlp.A_ineq @ z, -t_vals])
        else:
            A_all = nlp.A_ineq
            lo_all = nlp.ineq_lower - nlp.A_ineq @ z if nlp.A_ineq.shape[0] else nlp.ineq_lower
            hi_all = nlp.ineq_upper - nlp.A_ineq @ z if nlp.A_ineq.shape[0] else nlp.ineq_upper

        qp = qp_active_set(B, g, J, -c, A_all, lo_all, hi_all, warm_active=warm)
        if qp.status != "optimal":
            # Proportional relaxation of the equality targets; a crude but
            # deterministic stand-in for a full elastic-mode restoration.
            beta = 0.5
            for _ in range(5):
                qp = qp_active_set(B, g, J, -beta * c, A_all, lo_all, hi_all)
                relaxed += 1
                if qp.status == "optimal":
                    break
                beta *= 0.5
            if qp.status != "optimal":
                status = "qp_failure"
                break
        warm = qp.active_set
        d = qp.d
        lam = qp.lam_eq
        nu_all = qp.mu
        nu_lin = nu_all[: nlp.A_ineq.shape[0]]
        nu_nl = nu_all[nlp.A_ineq.shape[0]:] if has_nl else np.zeros(0)

        mult_max = max(float(np.max(np.abs(lam), initial=0.0)),
                       float(np.max(np.abs(nu_all), initial=0.0)))
        needed = 1.1 * mult_max
        if sigma < needed:
            sigma = max(needed, sigma * opts.penalty_growth)

        if float(np.max(np.abs(d), initial=0.0)) < 1e-13:
            if feas <= opts.eq_tol and stationarity(g, J, Jt) <= opts.kkt_tol:
                status = "converged"
            else:
                status = "line_search_failure"
            break

        lin_viol0 = _linear_violation(nlp.A_ineq, nlp.ineq_lower, nlp.ineq_upper, z)
        merit0 = _merit(f, c, lin_viol0, t_vals, sigma)
        viol1_0 = (merit0 - f) / sigma
        descent = float(g @ d) - sigma * viol1_0

        def try_point(z_try):
            f_try = nlp.objective(z_try)
            c_try = np.atleast_1d(nlp.eq_fun(z_try))
            t_try = np.atleast_1d(nlp.ineq_fun(z_try)) if has_nl else None
            lv_try = _linear_violation(nlp.A_ineq, nlp.ineq_lower, nlp.ineq_upper, z_try)
            return f_try, c_try, t_try, _merit(f_try, c_try, lv_try, t_try, sigma)

        alpha = 1.0
        accepted = False
        tried_soc = False
        for _ in range(opts.max_backtracks):
            z_try = z + alpha * d
            f_try, c_try, t_try, m_try = try_point(z_try)
            bound = merit0 + opts.ls_armijo * alpha * min(descent, 0.0)
            if m_try <= bound:
                accepted = True
                break
            if not tried_soc and c.size:
                # Second-order correction: the full step satisfies the
                # linearized equalities but curvature reinflates |c|; a
                # minimum-norm correction restoring J dc = -c(z+d) often
                # recovers the full step (Maratos remedy).
                tried_soc = True
                JJt_mat = J @ J.T
                try:
                    dc = J.T @ np.linalg.solve(JJt_mat, -c_try)
                except np.linalg.LinAlgError:
                    dc = None
                if dc is not None:
                    z_soc = z_try + alpha * dc
                    f_s, c_s, t_s, m_s = try_point(z_soc)
                    if m_s <= bound:
                        z_try, f_try, c_try, t_try = z_soc, f_s, c_s, t_s
                        accepted = True
                        break
            alpha *= opts.ls_backtrack
        if not accepted:
            if not did_reset:
                # Curvature information is poor; restart from a scaled identity
                # (and fall back to BFGS updating if a model Hessian was used).
                use_gn = False
                B = opts.h0 * np.eye(n)
                did_reset = True
                continue
            status = "line_search_failure"
            break
        did_reset = False

        s = alpha * d
        g_new = grad(z_try)
        J_new = eq_jac(z_try)
        Jt_new = nl_jac(z_try) if has_nl else None

        def lagr_grad(gg, JJ, JJt):
            r = gg + JJ.T @ lam
            if nu_lin.size:
                r = r + nlp.A_ineq.T @ nu_lin
            if has_nl and nu_nl.size:
                r = r + JJt.T @ nu_nl
            return r

        if use_gn:
            B = gn_hessian(z_try)
        else:
            y = lagr_grad(g_new, J_new, Jt_new) - lagr_grad(g, J, Jt)
            Bs = B @ s
            sBs = float(s @ Bs)
            sy = float(s @ y)
            if sBs > 1e-14:
                if sy < 0.2 * sBs:
                    theta = 0.8 * sBs / (sBs - sy)
                    y = theta * y + (1.0 - theta) * Bs
                    sy = float(s @ y)
                if sy > 1e-14:
                    B = B + np.outer(y, y) / sy - np.outer(Bs, Bs) / sBs
                    B = 0.5 * (B + B.T)

        if opts.verbose:
            print(f"  sqp it={it:4d} f={f_try: .6e} |c|={np.max(np.abs(c_try), initial=0.0):.3e} "
                  f"|d|={np.max(np.abs(d)):.3e} alpha={alpha:.3e} sigma={sigma:.2e} "
                  f"qp_it={qp.iterations} act={len(qp.active_set)}")

        z, f, g, c, J = z_try, f_try, g_new, c_try, J_new
        t_vals, Jt = t_try, Jt_new
        if iterates is not None:
            iterates.append(z.copy())

    feas = feasibility(z, c, t_vals)
    report = SolveReport(
        status=status,
        iterations=iters_done,
        objective=float(f),
        max_eq_residual=float(np.max(np.abs(c), initial=0.0)),
        max_ineq_violation=max(
            float(np.max(_linear_violation(nlp.A_ineq, nlp.ineq_lower,
                                           nlp.ineq_upper, z), initial=0.0)),
            float(np.max(np.maximum(t_vals, 0.0), initial=0.0)) if t_vals is not None else 0.0,
        ),
        wall_time=time.perf_counter() - t_start,
        relaxed_qp_steps=relaxed,
        iterates=iterates,
    )
    report.lam_eq = lam
    report.mu_lin = nu_lin
    report.mu_nl = nu_nl
    return z, report
