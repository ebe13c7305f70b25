"""Heat-flux feedback laws and the energy bookkeeping around them."""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from stefanlab.observer import ObserverState
from stefanlab.params import PhysicalParams, ScenarioConfig
from stefanlab.plant import PlantState
from stefanlab.transforms import kernel_P

State = Union[PlantState, ObserverState]

# Nodes used to integrate the kernel P(., s) over [0, s].
KERNEL_QUAD_NODES = 201


@dataclass(frozen=True)
class ControlOutput:
    qc: float
    internal_energy: float


def field_integral(theta: np.ndarray, length: float) -> float:
    """int_0^length u dx = length * int_0^1 theta dxi (trapezoid)."""
    return length * trapezoid(theta, dx=1.0 / (len(theta) - 1))


def feedback_law(integral: float, interface: float, cfg: ScenarioConfig,
                 phys: PhysicalParams) -> float:
    return -cfg.c * phys.k * (integral / phys.alpha + (interface - cfg.sr) / phys.beta)


def _field_and_extent(state: State):
    if isinstance(state, ObserverState):
        return state.theta_hat, state.y_prev
    return state.theta, state.s


def internal_energy(state: State, phys: PhysicalParams) -> float:
    """(1/alpha) int u dx + s / beta for a plant or observer snapshot."""
    theta, extent = _field_and_extent(state)
    return field_integral(theta, extent) / phys.alpha + extent / phys.beta


def state_feedback(st: PlantState, cfg: ScenarioConfig, phys: PhysicalParams) -> ControlOutput:
    integral = field_integral(st.theta, st.s)
    qc = feedback_law(integral, st.s, cfg, phys)
    return ControlOutput(qc=qc, internal_energy=integral / phys.alpha + st.s / phys.beta)


def output_feedback(ob: ObserverState, y_now: float, cfg: ScenarioConfig,
                    phys: PhysicalParams) -> ControlOutput:
    """Same law as ``state_feedback`` on the estimate over [0, Y]."""
    integral = field_integral(ob.theta_hat, y_now)
    qc = feedback_law(integral, y_now, cfg, phys)
    return ControlOutput(qc=qc, internal_energy=integral / phys.alpha + y_now / phys.beta)


# --------------------------
# Trace checks
# --------------------------
def kernel_integral(s: float, lam: float, alpha: float, nodes: int = KERNEL_QUAD_NODES) -> float:
    """int_0^s P(x, s) dx by the trapezoid rule."""
    x = np.linspace(0.0, s, nodes)
    return trapezoid(kernel_P(x, s, lam, alpha), x)


@dataclass
class QcOdeCheck:
    residual: np.ndarray
    margin: np.ndarray
    tolerance: np.ndarray

    @property
    def inequality_ok(self) -> bool:
        return bool(np.all(self.margin >= -self.tolerance))

    @property
    def worst_margin(self) -> float:
        return float(np.min(self.margin + self.tolerance)) if len(self.margin) else 0.0


def qc_ode_residual(trace: pd.DataFrame, cfg: ScenarioConfig, phys: PhysicalParams,
                    rel_tol: float = 0.05) -> QcOdeCheck:
    """Residual of qdot = -c q + c k (1 + int P) err_x(s) along a trace.

    ``margin`` is the forward difference of q_c plus c * q_c; the
    inequality qdot >= -c q holds where it is above ``-tolerance``.
    """
    if len(trace) < 3:
        raise ValueError(f"q_c residual needs at least 3 rows, got {len(trace)}")

    t = trace["t"].to_numpy()
    qc = trace["qc"].to_numpy()
    s = trace["s"].to_numpy()
    err_x = trace["err_x_s"].to_numpy()

    qdot = np.diff(qc) / np.diff(t)
    margin = qdot + cfg.c * qc[:-1]
    weights = np.array([1.0 + kernel_integral(si, cfg.lam, phys.alpha) for si in s[:-1]])
    residual = margin - cfg.c * phys.k * weights * err_x[:-1]
    tolerance = rel_tol * cfg.c * np.abs(qc[:-1])
    return QcOdeCheck(residual=residual, margin=margin, tolerance=tolerance)


def energy_flux_residual(trace: pd.DataFrame, k: Optional[float] = None) -> float:
    """|dE - (1/k) sum q_c dt| / |dE| between the first and last rows.

    Uses the logged ``flux_integral`` column when present; otherwise the
    zero-order-hold sum of ``qc`` with conductivity ``k``.
    """
    energy = trace["energy"].to_numpy()
    delta = energy[-1] - energy[0]
    if "flux_integral" in trace:
        flux = trace["flux_integral"].iloc[-1] - trace["flux_integral"].iloc[0]
    else:
        if k is None:
            raise ValueError("k is required when the trace has no flux_integral column")
        t = trace["t"].to_numpy()
        flux = float(np.sum(trace["qc"].to_numpy()[:-1] * np.diff(t))) / k
    if delta == 0.0:
        return 0.0 if flux == 0.0 else float("inf")
    return abs(delta - flux) / abs(delta)
