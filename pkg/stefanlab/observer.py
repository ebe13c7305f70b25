"""Boundary observer driven by the interface measurement Y(t) = s(t).

The estimate runs the plant model on [0, Y] with the same heat input and
an output injection through the gain P1(x, Y) acting on the mismatch
Ydot / beta + u_hat_x(Y). The mismatch is the plant's discrete interface
balance evaluated on the estimate, so it vanishes with the estimation
error. The injection is explicit in time.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from stefanlab.params import PhysicalParams, ScenarioConfig
from stefanlab.plant import advance_field, boundary_slope, interface_balance, plant_grid
from stefanlab.specfun import bessel_i1_ratio


@dataclass
class ObserverState:
    t: float
    y_prev: float
    theta_hat: np.ndarray
    ydot: float = 0.0
    # measurement the velocity estimate was differenced from
    y_lag: Optional[float] = None
    # velocity the stored estimate was advanced with
    ydot_lag: Optional[float] = None

    @property
    def n(self) -> int:
        return len(self.theta_hat) - 1


def observer_gain(x, s, lam, alpha):
    """P1(x, s) = -lam * s * I1(z) / z with z^2 = (lam / alpha)(s^2 - x^2)."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0) or np.any(x_arr > s):
        raise ValueError(f"observer gain needs 0 <= x <= s (s={s!r})")
    z2 = (lam / alpha) * (s * s - x_arr * x_arr)
    return -lam * s * bessel_i1_ratio(z2)


def estimate_interface_velocity(y_now: float, y_prev: Optional[float], dt: float,
                                gamma: float = 0.0, previous: Optional[float] = None,
                                fallback: Optional[float] = None) -> float:
    """Backward difference of the measurement, optionally EMA-smoothed.

    With no previous measurement the model-consistent ``fallback`` is
    returned. ``gamma`` weights the ``previous`` estimate; 0 passes the raw
    difference through.
    """
    if y_prev is None:
        if fallback is None:
            raise ValueError("first velocity estimate needs a fallback value")
        return float(fallback)
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    raw = (y_now - y_prev) / dt
    if gamma == 0.0 or previous is None:
        return raw
    return (1.0 - gamma) * raw + gamma * previous


def init_observer(cfg: ScenarioConfig, phys: PhysicalParams) -> ObserverState:
    xi = plant_grid(cfg.grid_n)
    theta_hat = cfg.Hhat * cfg.s0 * (1.0 - xi)
    theta_hat[-1] = 0.0
    ydot = estimate_interface_velocity(
        cfg.s0, None, cfg.dt,
        fallback=-phys.beta * boundary_slope(theta_hat) / cfg.s0,
    )
    return ObserverState(t=0.0, y_prev=cfg.s0, theta_hat=theta_hat, ydot=ydot, y_lag=cfg.s0)


def innovation(ob: ObserverState, phys: PhysicalParams) -> float:
    """Ydot / beta + u_hat_x at the interface, from the stored estimate.

    The estimate was advanced on the length ``y_lag`` at velocity
    ``ydot_lag``, and ``ydot`` is the measured velocity of that same step.
    Zero until a measured velocity exists.
    """
    if ob.ydot_lag is None or ob.y_lag is None:
        return 0.0
    return interface_balance(ob.theta_hat, ob.y_lag, ob.ydot, ob.ydot_lag,
                             phys.alpha, phys.beta)


def step_observer(ob: ObserverState, y_now: float, qc: float, dt: float,
                  cfg: ScenarioConfig, phys: PhysicalParams) -> ObserverState:
    """Assimilate ``y_now`` and advance the estimate by ``dt`` under ``qc``."""
    if not y_now > 0:
        raise ValueError(f"measurement must be positive, got {y_now!r}")

    xi = plant_grid(ob.n)
    gain = observer_gain(xi * y_now, y_now, cfg.lam, phys.alpha)
    source = -gain * innovation(ob, phys)

    inflow = -(qc / phys.k) * ob.y_prev
    theta_hat = advance_field(ob.theta_hat, ob.y_prev, ob.ydot, inflow, dt,
                              phys.alpha, source=source)

    ydot = estimate_interface_velocity(y_now, ob.y_prev, dt, gamma=cfg.ydot_smoothing,
                                       previous=ob.ydot)
    return ObserverState(t=ob.t + dt, y_prev=y_now, theta_hat=theta_hat, ydot=ydot,
                          y_lag=ob.y_prev, ydot_lag=ob.ydot)
