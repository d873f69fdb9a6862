"""Curvilinear single-track vehicle model for the valet-parking benchmark.

State ordering: x = [v_x, v_y, r, s, w, theta, w_p, theta_p, delta, t_r]
  v_x, v_y   body-frame velocities (m/s)
  r          yaw rate (rad/s)
  s          arc-length progress along the centerline (m)
  w, theta   lateral deviation (m) and heading error (rad) to the centerline
  w_p, theta_p  parking-spot position (m) and heading (rad) tracking errors
  delta      steering angle (rad)
  t_r        normalized longitudinal acceleration command (-)
Input: u = [t_r_dot, delta_dot] (rates; the model is input-rate augmented).

The derivative is a convex fusion of a dynamic single-track model (linear
tires, slip angles guarded by a smooth floor on v_x so the model stays
differentiable through standstill) and a kinematic single-track model, so the
vehicle can start from and come to rest:

    xdot = lam * f_dyn(x, u) + (1 - lam) * f_kin(x, u)

The model and its Jacobians are derived symbolically once per parameter set
and lambdified; the curvature profile kappa_c(s) enters as a runtime argument
with its s-derivative folded into the Jacobian by the chain rule.

All numeric parameter defaults are artifact-chosen compact-EV-scale values
(the benchmark properties do not depend on the exact numbers); see
``configs/avp_default.yaml`` for the documented schema with units.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import sympy as sp
import yaml

from .errors import SingularCurvilinearError
from .ocp import OcpProblem

N_STATES = 10
N_INPUTS = 2

_SINGULARITY_TOL = 1e-9


def _default_q() -> np.ndarray:
    return np.diag([1.0, 0.1, 0.1, 0.0, 5.0, 2.0, 0.0, 0.0, 0.1, 0.1])


def _default_r() -> np.ndarray:
    return np.diag([0.5, 0.5])


@dataclass
class VehicleParams:
    """Physical, track and cost parameters of the parking benchmark."""

    mass: float = 1200.0          # kg
    inertia_z: float = 1800.0     # kg m^2
    l_f: float = 1.25             # m, CoG to front axle
    l_r: float = 1.35             # m, CoG to rear axle
    c_alpha_f: float = 60000.0    # N/rad, front cornering stiffness
    c_alpha_r: float = 65000.0    # N/rad, rear cornering stiffness
    a_max: float = 3.0            # m/s^2, acceleration at t_r = 1
    drive_split: float = 0.5      # front-axle share of longitudinal force
    roll_resist: float = 140.0    # N, rolling-resistance magnitude
    drag_coeff: float = 0.45      # N s^2/m^2, aerodynamic drag
    v_eps: float = 0.1            # m/s, smooth floor for slip-angle divisions
    fusion_lambda: float = 0.2    # dynamic/kinematic blend in [0, 1]
    kappa_const: float = 0.0      # 1/m, centerline curvature when no callback set
    curvature: Optional[Callable[[float], float]] = None
    curvature_deriv: Optional[Callable[[float], float]] = None
    w_min: float = -3.0           # m, right track limit
    w_max: float = 3.0            # m, left track limit
    s_target: float = 8.0         # m, parking-spot arc length
    blend_sharpness: float = 0.5  # 1/m^2, parking-objective fade-in rate
    v_ref: float = 1.5            # m/s, tracked forward speed
    Q: np.ndarray = field(default_factory=_default_q)    # 10x10, PSD
    R: np.ndarray = field(default_factory=_default_r)    # 2x2, PD
    q_wp: float = 1.0
    q_theta_p: float = 1.0

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=float)
        self.R = np.asarray(self.R, dtype=float)
        for name in ("mass", "inertia_z", "l_f", "l_r", "c_alpha_f", "c_alpha_r",
                     "a_max", "v_eps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.fusion_lambda <= 1.0:
            raise ValueError("fusion_lambda must lie in [0, 1]")
        if self.Q.shape != (N_STATES, N_STATES) or self.R.shape != (N_INPUTS, N_INPUTS):
            raise ValueError("Q must be 10x10 and R 2x2")
        if np.min(np.linalg.eigvalsh(0.5 * (self.Q + self.Q.T))) < -1e-10:
            raise ValueError("Q must be positive semidefinite")
        if np.min(np.linalg.eigvalsh(0.5 * (self.R + self.R.T))) <= 0:
            raise ValueError("R must be positive definite")

    def kappa_at(self, s: float) -> float:
        return self.curvature(s) if self.curvature is not None else self.kappa_const

    def dkappa_at(self, s: float) -> float:
        if self.curvature_deriv is not None:
            return self.curvature_deriv(s)
        return 0.0

    def _model_key(self) -> tuple:
        return (self.mass, self.inertia_z, self.l_f, self.l_r, self.c_alpha_f,
                self.c_alpha_r, self.a_max, self.drive_split, self.roll_resist,
                self.drag_coeff, self.v_eps)


def fusion_lambda_schedule(v_x: float, v_lo: float, v_hi: float) -> float:
    """Optional speed-scheduled blend: 0 below v_lo, 1 above v_hi, linear between.

    Provided as an extension for closed-loop use; the transcription keeps the
    constant ``fusion_lambda`` so the model stays smooth inside the NLP.
    """
    return float(np.clip((v_x - v_lo) / (v_hi - v_lo), 0.0, 1.0))


@lru_cache(maxsize=8)
def _build_model(key: tuple):
    """Symbolic fused model; returns lambdified (f, df/dx, df/du, df/dkappa)."""
    (mass, iz, lf, lr, caf, car, a_max, split, c0, c2, eps) = key
    vx, vy, r, s, w, th, wp, thp, dl, tr = sp.symbols(
        "vx vy r s w th wp thp dl tr", real=True)
    u1, u2 = sp.symbols("u1 u2", real=True)   # u = [t_r_dot, delta_dot]
    kap, lam = sp.symbols("kap lam", real=True)

    x_syms = [vx, vy, r, s, w, th, wp, thp, dl, tr]
    u_syms = [u1, u2]

    vxg = sp.sqrt(vx ** 2 + eps ** 2)
    f_res = c0 * sp.tanh(vx / eps) + c2 * vx * vxg
    fx_tot = tr * mass * a_max
    fxf, fxr = split * fx_tot, (1 - split) * fx_tot
    alpha_f = dl - sp.atan((vy + lf * r) / vxg)
    alpha_r = -sp.atan((vy - lr * r) / vxg)
    fyf, fyr = caf * alpha_f, car * alpha_r

    sdot = (vx * sp.cos(th) - vy * sp.sin(th)) / (1 - kap * w)
    f_dyn = sp.Matrix([
        (fxf * sp.cos(dl) + fxr - fyf * sp.sin(dl) - f_res + mass * r * vy) / mass,
        (fxf * sp.sin(dl) + fyr + fyf * sp.cos(dl) - mass * r * vx) / mass,
        (lf * (fyf * sp.cos(dl) + fxf * sp.sin(dl)) - lr * fyr) / iz,
        sdot,
        vx * sp.sin(th) + vy * sp.cos(th),
        r - kap * sdot,
        vx * sp.sin(thp) + vy * sp.cos(thp),
        r,
        u2,
        u1,
    ])

    length = lf + lr
    ax = (fx_tot - f_res) / mass
    steer_rate_term = ax * sp.tan(dl) + vx * u2 / sp.cos(dl) ** 2
    psidot_k = vx * sp.tan(dl) / length
    f_kin = sp.Matrix([
        ax,
        (lr / length) * steer_rate_term,
        steer_rate_term / length,
        sdot,
        vx * sp.sin(th) + vy * sp.cos(th),
        psidot_k - kap * sdot,
        vx * sp.sin(thp) + vy * sp.cos(thp),
        psidot_k,
        u2,
        u1,
    ])

    f = lam * f_dyn + (1 - lam) * f_kin
    args = x_syms + u_syms + [kap, lam]
    f_fun = sp.lambdify(args, f, "numpy")
    jx_fun = sp.lambdify(args, f.jacobian(x_syms), "numpy")
    ju_fun = sp.lambdify(args, f.jacobian(u_syms), "numpy")
    fk_fun = sp.lambdify(args, f.diff(kap), "numpy")
    return f_fun, jx_fun, ju_fun, fk_fun


def _model_args(x, u, p: VehicleParams):
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    kap = p.kappa_at(float(x[3]))
    if abs(1.0 - kap * float(x[4])) < _SINGULARITY_TOL:
        raise SingularCurvilinearError(
            f"1 - kappa*w = {1.0 - kap * float(x[4]):.3e} at s={x[3]:.3f}"
        )
    return x, u, kap


def vehicle_dynamics(x, u, p: VehicleParams) -> np.ndarray:
    """Fused state derivative; raises SingularCurvilinearError at 1 - kappa*w ~ 0."""
    x, u, kap = _model_args(x, u, p)
    f_fun, _, _, _ = _build_model(p._model_key())
    return np.asarray(f_fun(*x, *u, kap, p.fusion_lambda), dtype=float).ravel()


def vehicle_jacobians(x, u, p: VehicleParams):
    """Analytic (df/dx, df/du), with the curvature s-dependence chained in."""
    x, u, kap = _model_args(x, u, p)
    _, jx_fun, ju_fun, fk_fun = _build_model(p._model_key())
    args = (*x, *u, kap, p.fusion_lambda)
    jx = np.asarray(jx_fun(*args), dtype=float)
    ju = np.asarray(ju_fun(*args), dtype=float)
    dk = p.dkappa_at(float(x[3]))
    if dk != 0.0:
        jx[:, 3] += np.asarray(fk_fun(*args), dtype=float).ravel() * dk
    return jx, ju


def avp_stage_cost(x, u, x_ref, p: VehicleParams) -> float:
    """Quadratic tracking cost plus the distance-gated parking objective."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    dx = x - np.asarray(x_ref, dtype=float)
    gate = np.exp(-p.blend_sharpness * (x[3] - p.s_target) ** 2)
    parking = (1.0 - gate) * (p.q_wp * x[6] ** 2 + p.q_theta_p * x[7] ** 2)
    return float(dx @ p.Q @ dx + u @ p.R @ u + parking)


def avp_stage_cost_grad(x, u, x_ref, p: VehicleParams):
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    dx = x - np.asarray(x_ref, dtype=float)
    gx = 2.0 * p.Q @ dx
    gate = np.exp(-p.blend_sharpness * (x[3] - p.s_target) ** 2)
    quad = p.q_wp * x[6] ** 2 + p.q_theta_p * x[7] ** 2
    gx[3] += 2.0 * p.blend_sharpness * (x[3] - p.s_target) * gate * quad
    gx[6] += (1.0 - gate) * 2.0 * p.q_wp * x[6]
    gx[7] += (1.0 - gate) * 2.0 * p.q_theta_p * x[7]
    return gx, 2.0 * p.R @ u


def avp_stage_cost_hess(x, u, x_ref, p: VehicleParams):
    """(lxx, lxu, luu) of the stage cost; the gate couples s with (w_p, theta_p)."""
    x = np.asarray(x, dtype=float)
    lxx = 2.0 * p.Q.copy()
    a = p.blend_sharpness
    ds = x[3] - p.s_target
    gate = np.exp(-a * ds ** 2)
    quad = p.q_wp * x[6] ** 2 + p.q_theta_p * x[7] ** 2
    lxx[3, 3] += (2.0 * a - 4.0 * a ** 2 * ds ** 2) * gate * quad
    c_wp = 2.0 * a * ds * gate * 2.0 * p.q_wp * x[6]
    c_tp = 2.0 * a * ds * gate * 2.0 * p.q_theta_p * x[7]
    lxx[3, 6] += c_wp
    lxx[6, 3] += c_wp
    lxx[3, 7] += c_tp
    lxx[7, 3] += c_tp
    lxx[6, 6] += (1.0 - gate) * 2.0 * p.q_wp
    lxx[7, 7] += (1.0 - gate) * 2.0 * p.q_theta_p
    return lxx, np.zeros((N_STATES, N_INPUTS)), 2.0 * p.R.copy()


def cart_to_curvilinear(X, Y, psi, Xc, Yc, psi_c):
    """Cartesian pose to (lateral deviation, heading error) at a centerline point."""
    w = (Y - Yc) * np.cos(psi_c) - (X - Xc) * np.sin(psi_c)
    return float(w), float(psi - psi_c)


def avp_reference(p: VehicleParams) -> np.ndarray:
    """Zero reference for all states except the tracked forward speed."""
    x_ref = np.zeros(N_STATES)
    x_ref[0] = p.v_ref
    return x_ref


def avp_problem(p: Optional[VehicleParams] = None, t0: float = 0.0, tf: float = 2.0,
                x0: Optional[np.ndarray] = None) -> OcpProblem:
    """Single-shot valet-parking OCP, initialized near the lateral track limit."""
    p = p or VehicleParams()
    if x0 is None:
        x0 = np.zeros(N_STATES)
        x0[0] = 1.0      # rolling start
        x0[4] = 2.99     # just inside the lateral bound
    x_ref = avp_reference(p)

    x_lower = np.array([-1.0, -2.0, -2.0, -1.0, p.w_min, -np.pi / 2,
                        -5.0, -np.pi, -0.6, -1.0])
    x_upper = np.array([10.0, 2.0, 2.0, 50.0, p.w_max, np.pi / 2,
                        5.0, np.pi, 0.6, 1.0])
    u_lower = np.array([-1.0, -0.7])
    u_upper = np.array([1.0, 0.7])

    return OcpProblem(
        n_x=N_STATES,
        n_u=N_INPUTS,
        dynamics=lambda x, u: vehicle_dynamics(x, u, p),
        stage_cost=lambda x, u: avp_stage_cost(x, u, x_ref, p),
        x_lower=x_lower,
        x_upper=x_upper,
        u_lower=u_lower,
        u_upper=u_upper,
        x0=np.asarray(x0, dtype=float),
        t0=t0,
        tf=tf,
        dynamics_jacobians=(
            lambda x, u: vehicle_jacobians(x, u, p)[0],
            lambda x, u: vehicle_jacobians(x, u, p)[1],
        ),
        stage_cost_grad=lambda x, u: avp_stage_cost_grad(x, u, x_ref, p),
        stage_cost_hess=lambda x, u: avp_stage_cost_hess(x, u, x_ref, p),
        name="avp",
    )


_SCALAR_FIELDS = (
    "mass", "inertia_z", "l_f", "l_r", "c_alpha_f", "c_alpha_r", "a_max",
    "drive_split", "roll_resist", "drag_coeff", "v_eps", "fusion_lambda",
    "kappa_const", "w_min", "w_max", "s_target", "blend_sharpness", "v_ref",
    "q_wp", "q_theta_p",
)


def vehicle_params_from_dict(d: dict) -> VehicleParams:
    """Build params from a config mapping; Q/R are given as diagonals or full matrices."""
    kwargs = {}
    for key in _SCALAR_FIELDS:
        if key in d:
            kwargs[key] = float(d[key])
    if "q_diag" in d:
        kwargs["Q"] = np.diag(np.asarray(d["q_diag"], dtype=float))
    elif "Q" in d:
        kwargs["Q"] = np.asarray(d["Q"], dtype=float)
    if "r_diag" in d:
        kwargs["R"] = np.diag(np.asarray(d["r_diag"], dtype=float))
    elif "R" in d:
        kwargs["R"] = np.asarray(d["R"], dtype=float)
    unknown = set(d) - set(_SCALAR_FIELDS) - {"q_diag", "r_diag", "Q", "R"}
    if unknown:
        raise ValueError(f"unknown vehicle config keys: {sorted(unknown)}")
    return VehicleParams(**kwargs)


def load_config(path) -> dict:
    """Parse a YAML config file with optional vehicle/problem/solver sections."""
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ValueError(f"config root must be a mapping, got {type(raw).__name__}")
    cfg = {"vehicle": raw.get("vehicle", {}) or {},
           "problem": raw.get("problem", {}) or {},
           "solver": raw.get("solver", {}) or {}}
    unknown = set(raw) - set(cfg)
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    return cfg


def load_vehicle_params(path) -> VehicleParams:
    return vehicle_params_from_dict(load_config(path)["vehicle"])
