"""Transcribe a continuous OCP into a finite dense NLP.

Three routes are provided:

* ``transcribe_socse`` -- Legendre-spline collocation on an LGL grid with the
  Bernstein envelope rows bounding every state/control channel over the whole
  interval (the safety-envelope scheme).
* ``transcribe_soc`` -- identical except the box constraints are imposed only
  at the collocation nodes (the classic node-only scheme; ``pseudospectral``
  mode is this with N = M + 1 nodes, the Lagrange-equivalent choice).
* ``transcribe_multiple_shooting`` -- RK4 multiple shooting with
  piecewise-constant controls.

The horizon uses a single spline by default; ``segments > 1`` splits it into
equal subintervals joined by C0 state-continuity rows.

The stage-cost integral is evaluated as the full quadrature sum over all N
nodes plus the terminal cost at the right endpoint; the terminal cost is not
scaled by the time map.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .envelope import EnvelopeMatrices, envelope_matrix, spline_bounds
from .errors import DofViolationError, LayoutError
from .integrators import fd_dynamics_jacobians, rk4_step, rk4_step_jacobians
from .ocp import OcpProblem
from .polynomial import (
    TimeMap,
    basis_matrix,
    legendre_deriv_values,
    legendre_values,
    lgl_grid,
    spline_samples,
)

MODES = ("socse", "soc", "pseudospectral")


@dataclass(frozen=True)
class CollocationConfig:
    """Spline degree M, collocation node count N and constraint mode.

    ``N=None`` picks the default: N = M for socse/soc, N = M + 1 for
    pseudospectral.
    """

    M: int
    N: Optional[int] = None
    mode: str = "socse"
    segments: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.M < 1:
            raise ValueError("spline degree must be at least 1")
        if self.segments < 1:
            raise ValueError("segments must be at least 1")
        if self.N is None:
            object.__setattr__(self, "N", self.M + 1 if self.mode == "pseudospectral" else self.M)
        if self.N < 2:
            raise ValueError("need at least 2 collocation nodes")

    @property
    def node_only(self) -> bool:
        return self.mode in ("soc", "pseudospectral")


@dataclass(frozen=True)
class SplineLayout:
    """Maps the flat decision vector to per-segment coefficient matrices.

    Per segment the state channels come first, then the control channels,
    each as M+1 contiguous Legendre coefficients.
    """

    M: int
    n_x: int
    n_u: int
    segments: int

    @property
    def rows(self) -> int:
        return self.M + 1

    @property
    def block(self) -> int:
        return self.rows * (self.n_x + self.n_u)

    @property
    def n_vars(self) -> int:
        return self.segments * self.block

    def x_slice(self, seg: int, channel: int) -> slice:
        start = seg * self.block + channel * self.rows
        return slice(start, start + self.rows)

    def u_slice(self, seg: int, channel: int) -> slice:
        start = seg * self.block + (self.n_x + channel) * self.rows
        return slice(start, start + self.rows)

    def decode(self, z: np.ndarray):
        z = np.asarray(z, dtype=float)
        if z.shape != (self.n_vars,):
            raise LayoutError(f"expected {self.n_vars} variables, got {z.shape}")
        ax, au = [], []
        for seg in range(self.segments):
            blk = z[seg * self.block:(seg + 1) * self.block]
            ax.append(blk[: self.rows * self.n_x].reshape(self.n_x, self.rows).T.copy())
            au.append(blk[self.rows * self.n_x:].reshape(self.n_u, self.rows).T.copy())
        return ax, au

    def encode(self, alpha_x, alpha_u) -> np.ndarray:
        z = np.empty(self.n_vars)
        for seg in range(self.segments):
            blk = np.concatenate([np.asarray(alpha_x[seg]).T.ravel(),
                                  np.asarray(alpha_u[seg]).T.ravel()])
            if blk.size != self.block:
                raise LayoutError("coefficient matrices do not match the layout")
            z[seg * self.block:(seg + 1) * self.block] = blk
        return z


@dataclass(frozen=True)
class MsLayout:
    """Multiple-shooting layout: node states then interval controls."""

    n_x: int
    n_u: int
    K: int

    @property
    def n_vars(self) -> int:
        return (self.K + 1) * self.n_x + self.K * self.n_u

    def states(self, z: np.ndarray) -> np.ndarray:
        return z[: (self.K + 1) * self.n_x].reshape(self.K + 1, self.n_x)

    def controls(self, z: np.ndarray) -> np.ndarray:
        return z[(self.K + 1) * self.n_x:].reshape(self.K, self.n_u)


@dataclass
class NlpProblem:
    """Dense NLP: smooth objective, nonlinear equalities, linear two-sided inequalities."""

    n_vars: int
    objective: Callable[[np.ndarray], float]
    eq_fun: Callable[[np.ndarray], np.ndarray]
    A_ineq: np.ndarray
    ineq_lower: np.ndarray
    ineq_upper: np.ndarray
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    eq_jac: Optional[Callable[[np.ndarray], np.ndarray]] = None
    ineq_fun: Optional[Callable[[np.ndarray], np.ndarray]] = None
    ineq_jac: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    layout: object = None
    n_eq: int = 0


@dataclass
class SplineSolution:
    """Decoded spline trajectory with envelope bounds and dense evaluation."""

    alpha_x: list
    alpha_u: list
    time_map: TimeMap
    cfg: CollocationConfig
    basis: object
    grid: object
    env: EnvelopeMatrices
    objective: Optional[float] = None
    x_bounds: tuple = None
    u_bounds: tuple = None

    def __post_init__(self):
        los_x, his_x, los_u, his_u = [], [], [], []
        for ax, au in zip(self.alpha_x, self.alpha_u):
            lo, hi = spline_bounds(ax, self.env)
            los_x.append(lo)
            his_x.append(hi)
            lo, hi = spline_bounds(au, self.env)
            los_u.append(lo)
            his_u.append(hi)
        self.x_bounds = (np.min(los_x, axis=0), np.max(his_x, axis=0))
        self.u_bounds = (np.min(los_u, axis=0), np.max(his_u, axis=0))

    def _segment_times(self):
        edges = np.linspace(self.time_map.t0, self.time_map.tf, self.cfg.segments + 1)
        return edges

    def _locate(self, t: np.ndarray):
        edges = self._segment_times()
        t = np.asarray(t, dtype=float)
        seg = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, self.cfg.segments - 1)
        width = edges[1] - edges[0]
        tau = 2.0 * (t - edges[seg]) / width - 1.0
        return seg, np.clip(tau, -1.0, 1.0)

    def _eval(self, alphas, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        seg, tau = self._locate(t)
        d = alphas[0].shape[1]
        out = np.empty((t.size, d))
        for k in range(self.cfg.segments):
            mask = seg == k
            if np.any(mask):
                out[mask] = spline_samples(alphas[k], self.basis, tau[mask])
        return out

    def x_at(self, t) -> np.ndarray:
        """Dense state evaluation in physical time; (len(t), n_x)."""
        return self._eval(self.alpha_x, t)

    def u_at(self, t) -> np.ndarray:
        return self._eval(self.alpha_u, t)

    def sample_dense(self, n: int):
        t = np.linspace(self.time_map.t0, self.time_map.tf, n)
        return t, self.x_at(t), self.u_at(t)


def _check_dof(ocp: OcpProblem, cfg: CollocationConfig):
    free = (ocp.n_u + ocp.n_x) * (cfg.M + 1)
    rows = ocp.n_x * (cfg.N + 1)
    if free < rows:
        raise DofViolationError(free, rows)


def _transcribe_collocation(ocp: OcpProblem, cfg: CollocationConfig) -> NlpProblem:
    _check_dof(ocp, cfg)
    layout = SplineLayout(M=cfg.M, n_x=ocp.n_x, n_u=ocp.n_u, segments=cfg.segments)
    basis = basis_matrix(cfg.M)
    grid = lgl_grid(cfg.N)
    env = envelope_matrix(cfg.M, basis)
    S = cfg.segments
    scale = 0.5 * (ocp.tf - ocp.t0) / S

    phi_nodes = np.stack([legendre_values(basis, t) for t in grid.nodes])       # (N, M+1)
    dphi_nodes = np.stack([legendre_deriv_values(basis, t) for t in grid.nodes])
    phi_start = legendre_values(basis, -1.0)
    phi_end = legendre_values(basis, 1.0)
    w = grid.weights

    n_x, n_u, rows = ocp.n_x, ocp.n_u, cfg.M + 1

    def unpack(z):
        return layout.decode(z)

    def node_values(ax, au):
        return phi_nodes @ ax, phi_nodes @ au   # (N, n_x), (N, n_u)

    def objective(z):
        ax, au = unpack(z)
        total = 0.0
        for seg in range(S):
            X, U = node_values(ax[seg], au[seg])
            stage = np.array([ocp.stage_cost(X[i], U[i]) for i in range(cfg.N)])
            total += scale * float(w @ stage)
        if ocp.terminal_cost is not None:
            total += float(ocp.terminal_cost(phi_end @ ax[-1]))
        return total

    gradient = None
    if ocp.stage_cost_grad is not None and (
            ocp.terminal_cost is None or ocp.terminal_cost_grad is not None):
        def gradient(z):
            ax, au = unpack(z)
            g = np.zeros(layout.n_vars)
            for seg in range(S):
                X, U = node_values(ax[seg], au[seg])
                gx_nodes = np.zeros((cfg.N, n_x))
                gu_nodes = np.zeros((cfg.N, n_u))
                for i in range(cfg.N):
                    lx, lu = ocp.stage_cost_grad(X[i], U[i])
                    gx_nodes[i] = lx
                    gu_nodes[i] = lu
                for c in range(n_x):
                    g[layout.x_slice(seg, c)] += scale * (phi_nodes.T @ (w * gx_nodes[:, c]))
                for c in range(n_u):
                    g[layout.u_slice(seg, c)] += scale * (phi_nodes.T @ (w * gu_nodes[:, c]))
            if ocp.terminal_cost is not None:
                gphi = ocp.terminal_cost_grad(phi_end @ ax[-1])
                for c in range(n_x):
                    g[layout.x_slice(S - 1, c)] += gphi[c] * phi_end
            return g

    hessian = None
    if ocp.stage_cost_hess is not None and ocp.terminal_cost is None:
        def hessian(z):
            ax, au = unpack(z)
            H = np.zeros((layout.n_vars, layout.n_vars))
            for seg in range(S):
                X, U = node_values(ax[seg], au[seg])
                sl = [layout.x_slice(seg, c) for c in range(n_x)]
                sl += [layout.u_slice(seg, c) for c in range(n_u)]
                for i in range(cfg.N):
                    lxx, lxu, luu = ocp.stage_cost_hess(X[i], U[i])
                    Hl = np.block([[lxx, lxu], [lxu.T, luu]])
                    op = scale * w[i] * np.outer(phi_nodes[i], phi_nodes[i])
                    for a in range(n_x + n_u):
                        for b in range(n_x + n_u):
                            if Hl[a, b] != 0.0:
                                H[sl[a], sl[b]] += Hl[a, b] * op
            return H

    n_eq = n_x * (1 + S * cfg.N + (S - 1))

    def eq_fun(z):
        ax, au = unpack(z)
        out = np.empty(n_eq)
        out[:n_x] = phi_start @ ax[0] - ocp.x0
        pos = n_x
        for seg in range(S):
            X, U = node_values(ax[seg], au[seg])
            dX = dphi_nodes @ ax[seg]
            for i in range(cfg.N):
                out[pos:pos + n_x] = dX[i] - scale * ocp.dynamics(X[i], U[i])
                pos += n_x
            if seg < S - 1:
                out[pos:pos + n_x] = phi_end @ ax[seg] - phi_start @ ax[seg + 1]
                pos += n_x
        return out

    eq_jac = None
    if ocp.dynamics_jacobians is not None:
        fx_fun, fu_fun = ocp.dynamics_jacobians

        def eq_jac(z):
            ax, au = unpack(z)
            J = np.zeros((n_eq, layout.n_vars))
            for c in range(n_x):
                J[c, layout.x_slice(0, c)] = phi_start
            pos = n_x
            for seg in range(S):
                X, U = node_values(ax[seg], au[seg])
                for i in range(cfg.N):
                    fx = fx_fun(X[i], U[i])
                    fu = fu_fun(X[i], U[i])
                    for r in range(n_x):
                        J[pos + r, layout.x_slice(seg, r)] += dphi_nodes[i]
                        for c in range(n_x):
                            J[pos + r, layout.x_slice(seg, c)] -= scale * fx[r, c] * phi_nodes[i]
                        for c in range(n_u):
                            J[pos + r, layout.u_slice(seg, c)] -= scale * fu[r, c] * phi_nodes[i]
                    pos += n_x
                if seg < S - 1:
                    for c in range(n_x):
                        J[pos + c, layout.x_slice(seg, c)] = phi_end
                        J[pos + c, layout.x_slice(seg + 1, c)] = -phi_start
                    pos += n_x
            return J

    # Linear inequality rows: envelope per channel (socse) or node values (soc).
    if cfg.node_only:
        m_rows = S * cfg.N * (n_x + n_u)
    else:
        m_rows = S * rows * (n_x + n_u)
    A = np.zeros((m_rows, layout.n_vars))
    lo = np.empty(m_rows)
    hi = np.empty(m_rows)
    pos = 0
    for seg in range(S):
        for c in range(n_x):
            blk = phi_nodes if cfg.node_only else env.C
            A[pos:pos + blk.shape[0], layout.x_slice(seg, c)] = blk
            lo[pos:pos + blk.shape[0]] = ocp.x_lower[c]
            hi[pos:pos + blk.shape[0]] = ocp.x_upper[c]
            pos += blk.shape[0]
        for c in range(n_u):
            blk = phi_nodes if cfg.node_only else env.C
            A[pos:pos + blk.shape[0], layout.u_slice(seg, c)] = blk
            lo[pos:pos + blk.shape[0]] = ocp.u_lower[c]
            hi[pos:pos + blk.shape[0]] = ocp.u_upper[c]
            pos += blk.shape[0]

    ineq_fun = ineq_jac = None
    if ocp.terminal_constraint is not None:
        def ineq_fun(z):
            ax, _ = unpack(z)
            return np.atleast_1d(ocp.terminal_constraint(phi_end @ ax[-1]))

    return NlpProblem(
        n_vars=layout.n_vars,
        objective=objective,
        gradient=gradient,
        eq_fun=eq_fun,
        eq_jac=eq_jac,
        A_ineq=A,
        ineq_lower=lo,
        ineq_upper=hi,
        ineq_fun=ineq_fun,
        ineq_jac=ineq_jac,
        hessian=hessian,
        layout=layout,
        n_eq=n_eq,
    )


def transcribe_socse(ocp: OcpProblem, cfg: CollocationConfig) -> NlpProblem:
    """Collocation NLP with full-interval envelope bounds on every channel."""
    if cfg.node_only:
        raise ValueError("config mode is node-only; use transcribe_soc")
    return _transcribe_collocation(ocp, cfg)


def transcribe_soc(ocp: OcpProblem, cfg: CollocationConfig) -> NlpProblem:
    """Collocation NLP with box constraints at the collocation nodes only."""
    if not cfg.node_only:
        raise ValueError("config mode is socse; use transcribe_socse")
    return _transcribe_collocation(ocp, cfg)


def transcribe(ocp: OcpProblem, cfg: CollocationConfig) -> NlpProblem:
    return transcribe_soc(ocp, cfg) if cfg.node_only else transcribe_socse(ocp, cfg)


def transcribe_multiple_shooting(ocp: OcpProblem, steps: int,
                                 substeps: int = 1) -> NlpProblem:
    """RK4 multiple-shooting NLP with piecewise-constant controls."""
    if steps < 1:
        raise ValueError("need at least one shooting interval")
    if substeps < 1:
        raise ValueError("substeps must be positive")
    layout = MsLayout(n_x=ocp.n_x, n_u=ocp.n_u, K=steps)
    n_x, n_u, K = ocp.n_x, ocp.n_u, steps
    dt = (ocp.tf - ocp.t0) / K
    h = dt / substeps

    if ocp.dynamics_jacobians is not None:
        fx_fun, fu_fun = ocp.dynamics_jacobians
    else:
        fx_fun, fu_fun = fd_dynamics_jacobians(ocp.dynamics)

    def step_map(x, u):
        for _ in range(substeps):
            x = rk4_step(ocp.dynamics, x, u, h)
        return x

    def step_map_jac(x, u):
        jx = np.eye(n_x)
        ju = np.zeros((n_x, n_u))
        for _ in range(substeps):
            x, sx, su = rk4_step_jacobians(ocp.dynamics, fx_fun, fu_fun, x, u, h)
            jx = sx @ jx
            ju = sx @ ju + su
        return x, jx, ju

    def objective(z):
        X, U = layout.states(z), layout.controls(z)
        total = sum(ocp.stage_cost(X[k], U[k]) for k in range(K)) * dt
        if ocp.terminal_cost is not None:
            total += float(ocp.terminal_cost(X[K]))
        return float(total)

    gradient = None
    if ocp.stage_cost_grad is not None and (
            ocp.terminal_cost is None or ocp.terminal_cost_grad is not None):
        def gradient(z):
            X, U = layout.states(z), layout.controls(z)
            g = np.zeros(layout.n_vars)
            gx = g[: (K + 1) * n_x].reshape(K + 1, n_x)
            gu = g[(K + 1) * n_x:].reshape(K, n_u)
            for k in range(K):
                lx, lu = ocp.stage_cost_grad(X[k], U[k])
                gx[k] += dt * lx
                gu[k] += dt * lu
            if ocp.terminal_cost is not None:
                gx[K] += ocp.terminal_cost_grad(X[K])
            return g

    hessian = None
    if ocp.stage_cost_hess is not None and ocp.terminal_cost is None:
        def hessian(z):
            X, U = layout.states(z), layout.controls(z)
            H = np.zeros((layout.n_vars, layout.n_vars))
            off = (K + 1) * n_x
            for k in range(K):
                lxx, lxu, luu = ocp.stage_cost_hess(X[k], U[k])
                sx = slice(k * n_x, (k + 1) * n_x)
                su = slice(off + k * n_u, off + (k + 1) * n_u)
                H[sx, sx] += dt * lxx
                H[sx, su] += dt * lxu
                H[su, sx] += dt * lxu.T
                H[su, su] += dt * luu
            return H

    n_eq = n_x * (K + 1)

    def eq_fun(z):
        X, U = layout.states(z), layout.controls(z)
        out = np.empty(n_eq)
        out[:n_x] = X[0] - ocp.x0
        for k in range(K):
            out[(k + 1) * n_x:(k + 2) * n_x] = X[k + 1] - step_map(X[k], U[k])
        return out

    def eq_jac(z):
        X, U = layout.states(z), layout.controls(z)
        J = np.zeros((n_eq, layout.n_vars))
        J[:n_x, :n_x] = np.eye(n_x)
        for k in range(K):
            _, jx, ju = step_map_jac(X[k], U[k])
            r = slice((k + 1) * n_x, (k + 2) * n_x)
            J[r, (k + 1) * n_x:(k + 2) * n_x] = np.eye(n_x)
            J[r, k * n_x:(k + 1) * n_x] = -jx
            J[r, (K + 1) * n_x + k * n_u:(K + 1) * n_x + (k + 1) * n_u] = -ju
        return J

    A = np.eye(layout.n_vars)
    lo = np.concatenate([np.tile(ocp.x_lower, K + 1), np.tile(ocp.u_lower, K)])
    hi = np.concatenate([np.tile(ocp.x_upper, K + 1), np.tile(ocp.u_upper, K)])

    ineq_fun = None
    if ocp.terminal_constraint is not None:
        def ineq_fun(z):
            return np.atleast_1d(ocp.terminal_constraint(layout.states(z)[K]))

    return NlpProblem(
        n_vars=layout.n_vars,
        objective=objective,
        gradient=gradient,
        eq_fun=eq_fun,
        eq_jac=eq_jac,
        A_ineq=A,
        ineq_lower=lo,
        ineq_upper=hi,
        ineq_fun=ineq_fun,
        hessian=hessian,
        layout=layout,
        n_eq=n_eq,
    )


def decode(z: np.ndarray, nlp: NlpProblem, time_map: TimeMap,
           cfg: CollocationConfig, objective: Optional[float] = None) -> SplineSolution:
    """Unpack a collocation NLP solution into an evaluable spline trajectory."""
    layout = nlp.layout
    if not isinstance(layout, SplineLayout):
        raise LayoutError("decode expects a collocation NLP")
    alpha_x, alpha_u = layout.decode(z)
    basis = basis_matrix(cfg.M)
    return SplineSolution(
        alpha_x=alpha_x,
        alpha_u=alpha_u,
        time_map=time_map,
        cfg=cfg,
        basis=basis,
        grid=lgl_grid(cfg.N),
        env=envelope_matrix(cfg.M, basis),
        objective=objective if objective is not None else nlp.objective(z),
    )
