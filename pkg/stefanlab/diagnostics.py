"""Norms, Lyapunov functionals, constraint monitors and decay-rate fits.

Everything here is a pure function of a trace or a snapshot; running a
monitor twice on the same data gives the same report.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid
from sklearn.linear_model import LinearRegression

from stefanlab.params import PhysicalParams, ScenarioConfig
from stefanlab.transforms import apply_inverse, controller_transform

logger = logging.getLogger(__name__)

FLAGS = ("qc_positive", "s_increasing", "s_below_sr", "u_nonnegative", "error_nonpositive")


def h1_norm_sq(f, s: float, include_l2: bool = True) -> float:
    """int f^2 dx + int f_x^2 dx over [0, s]; the first term is optional."""
    f = np.asarray(f, dtype=float)
    dx = s / (len(f) - 1)
    grad = np.gradient(f, dx, edge_order=2)
    total = trapezoid(grad * grad, dx=dx)
    if include_l2:
        total += trapezoid(f * f, dx=dx)
    return float(total)


# --------------------------
# Lyapunov functionals
# --------------------------
@dataclass(frozen=True)
class LyapunovConstants:
    p: float
    a: float
    b: float
    d: float


def lyapunov_constants(cfg: ScenarioConfig, phys: PhysicalParams) -> LyapunovConstants:
    alpha, beta = phys.alpha, phys.beta
    p = cfg.c * alpha / (16.0 * beta ** 2 * cfg.sr)
    a = max(cfg.sr ** 2, 16.0 * cfg.c * cfg.sr / alpha)
    b = min(alpha / (8.0 * cfg.sr ** 2), cfg.c, 2.0 * cfg.lam)
    # any positive weight works for monitoring
    d = cfg.lyapunov_d if cfg.lyapunov_d is not None else max(1.0, a * cfg.sr)
    return LyapunovConstants(p=p, a=a, b=b, d=d)


@dataclass(frozen=True)
class LyapunovSample:
    t: float
    v1_tilde: float
    vtot: float
    v: float
    wtilde_max: float
    what_at_s: float


def lyapunov_sample(t: float, s: float, theta: np.ndarray, theta_hat: np.ndarray,
                    cfg: ScenarioConfig, phys: PhysicalParams,
                    consts: Optional[LyapunovConstants] = None) -> LyapunovSample:
    """Transform the snapshot to target coordinates and evaluate the functionals."""
    consts = consts or lyapunov_constants(cfg, phys)
    X = s - cfg.sr
    err = np.asarray(theta) - np.asarray(theta_hat)

    w_tilde = apply_inverse(err, s, cfg.lam, phys.alpha)
    w_hat = controller_transform(theta_hat, X, s, cfg.c, phys.alpha, phys.beta)

    v1 = 0.5 * h1_norm_sq(w_tilde, s, cfg.h1_include_l2)
    vtot = 0.5 * h1_norm_sq(w_hat, s, cfg.h1_include_l2) + 0.5 * consts.p * X * X + consts.d * v1
    return LyapunovSample(
        t=t,
        v1_tilde=v1,
        vtot=vtot,
        v=vtot * math.exp(-consts.a * s),
        wtilde_max=float(np.max(w_tilde)),
        what_at_s=float(w_hat[-1]),
    )


@dataclass
class LyapunovReport:
    max_increase_rate: float
    tolerance: float
    bound_violations: int

    @property
    def non_increasing(self) -> bool:
        return self.max_increase_rate <= self.tolerance

    @property
    def ok(self) -> bool:
        return self.non_increasing and self.bound_violations == 0


def check_lyapunov(checkpoints: pd.DataFrame, consts: LyapunovConstants,
                   sr: float, rtol: float = 1e-3) -> LyapunovReport:
    """Monotonicity of V and the envelope e^{a sr} Vtot(0) e^{-bt} on Vtot.

    The increase rate is taken relative to the current V, so ``rtol`` is a
    fractional tolerance per second.
    """
    t = checkpoints["t"].to_numpy()
    v = checkpoints["v"].to_numpy()
    vtot = checkpoints["vtot"].to_numpy()
    if len(t) < 2:
        return LyapunovReport(0.0, rtol, 0)

    rates = np.diff(v) / np.diff(t) / np.maximum(v[:-1], np.finfo(float).tiny)
    envelope = math.exp(consts.a * sr) * vtot[0] * np.exp(-consts.b * (t - t[0]))
    slack = rtol * vtot[0]
    violations = int(np.count_nonzero(vtot > envelope + slack))
    return LyapunovReport(float(np.max(rates)), rtol, violations)


# --------------------------
# Constraint monitor
# --------------------------
@dataclass
class ConstraintReport:
    flags: pd.DataFrame
    epsilon: float
    first_violation: Dict[str, Optional[float]] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(t is None for t in self.first_violation.values())

    def passed(self, name: str) -> bool:
        return self.first_violation[name] is None

    def to_dict(self) -> Dict[str, object]:
        out: Dict[str, object] = {"epsilon": self.epsilon, "steps": len(self.flags)}
        for name in FLAGS:
            out[name] = "ok" if self.passed(name) else f"first violation at t={self.first_violation[name]:.6g}"
        return out


def monitor_constraints(trace: pd.DataFrame, cfg: ScenarioConfig) -> ConstraintReport:
    """Per-step physical constraints with grid tolerance C*(dxi^2 + dt)."""
    eps = cfg.grid_tolerance
    s = trace["s"].to_numpy()

    increasing = np.empty(len(s), dtype=bool)
    increasing[:-1] = np.diff(s) > 0
    if len(s):
        increasing[-1] = trace["sdot"].iloc[-1] > 0

    flags = pd.DataFrame({
        "t": trace["t"].to_numpy(),
        "qc_positive": trace["qc"].to_numpy() > 0,
        "s_increasing": increasing,
        "s_below_sr": s < cfg.sr,
        "u_nonnegative": trace["u_min"].to_numpy() >= -eps,
        "error_nonpositive": trace["err_max"].to_numpy() <= eps,
    })

    first = {}
    for name in FLAGS:
        bad = np.flatnonzero(~flags[name].to_numpy())
        first[name] = float(flags["t"].iloc[bad[0]]) if len(bad) else None
        if len(bad):
            logger.warning("constraint %s violated first at t=%.6g", name, first[name])
    return ConstraintReport(flags=flags, epsilon=eps, first_violation=first)


# --------------------------
# Decay rates
# --------------------------
def fit_decay_rate(t, values) -> float:
    """Negated least-squares slope of log(values) against t on the final half."""
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(values) < 10:
        raise ValueError(f"decay fit needs at least 10 samples, got {len(values)}")
    if np.any(values <= 0):
        raise ValueError("decay fit needs strictly positive samples")

    half = len(values) // 2
    model = LinearRegression().fit(t[half:].reshape(-1, 1), np.log(values[half:]))
    return float(-model.coef_[0])


def resolved_window(values, floor_ratio: float = 1e-16) -> int:
    """Length of the leading run of samples at or above floor_ratio * values[0].

    Past that point an error signal sits at round-off and carries no rate.
    """
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        return 0
    below = np.flatnonzero(~(values >= floor_ratio * values[0]))
    return int(below[0]) if len(below) else len(values)
