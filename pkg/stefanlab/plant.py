"""One-phase Stefan plant in the front-fixed coordinate xi = x / s(t).

In xi the melt obeys

    u_t = (alpha / s^2) u_xixi + (xi * sdot / s) u_xi,   0 < xi < 1
    u_xi(0) = -(q_c / k) * s,    u(1) = 0,    sdot = -(beta / s) u_xi(1)

Diffusion is backward Euler with central differences. The convection
coefficient is lagged one step and kept on the implicit side, which leaves
the system tridiagonal. The Neumann row uses a ghost node.

The interface velocity is the one for which the trapezoid melt energy
(s / alpha) * int(theta) + s / beta changes by exactly dt * q_c / k over the
step, so the discrete energy balance holds to rounding.
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.linalg import LinAlgError
from scipy.integrate import trapezoid
from scipy.linalg import solve_banded

from stefanlab.params import PhysicalParams, ScenarioConfig

# Fraction of the finite domain the interface may reach before a run aborts.
DOMAIN_ABORT_FRACTION = 0.95


class SimulationBlowUp(RuntimeError):
    """The interface left (0, 0.95 L) or the state stopped being finite."""


class NumericalError(RuntimeError):
    """The banded solver could not factor the step matrix."""


@dataclass
class PlantState:
    t: float
    s: float
    theta: np.ndarray
    # velocity of the step that produced this state
    sdot: float = 0.0

    @property
    def n(self) -> int:
        return len(self.theta) - 1


# --------------------------
# Grid helpers
# --------------------------
def plant_grid(n: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, n + 1)


def physical_nodes(st: PlantState) -> np.ndarray:
    return plant_grid(st.n) * st.s


def boundary_slope(theta: np.ndarray) -> float:
    """One-sided second-order d(theta)/d(xi) at xi = 1."""
    dxi = 1.0 / (len(theta) - 1)
    return (3.0 * theta[-1] - 4.0 * theta[-2] + theta[-3]) / (2.0 * dxi)


def interface_flux(st: PlantState) -> float:
    """u_x at x = s(t)."""
    return boundary_slope(st.theta) / st.s


def convection_number(length: float, velocity: float, dt: float, n: int) -> float:
    """Largest cell number dt * |xi * sdot / s| / dxi on the grid."""
    return dt * abs(velocity) / length * n


def tridiagonal_solve(a, b, c, rhs):
    """Solve a tridiagonal system.

    a: lower off-diagonal (first element ignored)
    b: diagonal
    c: upper off-diagonal (last element ignored)
    """
    ab = np.vstack([np.append(0.0, c[:-1]), b, np.append(a[1:], 0.0)])
    try:
        return solve_banded((1, 1), ab, rhs)
    except (LinAlgError, ValueError) as exc:
        raise NumericalError(f"tridiagonal solve failed: {exc}") from exc


def advance_field(theta, length, velocity, inflow_slope, dt, alpha, source=None):
    """One implicit step of the front-fixed heat equation.

    ``inflow_slope`` is the prescribed d(theta)/d(xi) at xi = 0 and
    ``source`` an optional explicit term added to the right-hand side.
    The returned field has its last node pinned to zero.
    """
    n = len(theta) - 1
    dxi = 1.0 / n
    xi = plant_grid(n)

    d = alpha * dt / (length ** 2 * dxi ** 2)
    conv = dt * xi * velocity / (2.0 * length * dxi)

    lower = -d + conv
    diag = np.full(n + 1, 1.0 + 2.0 * d)
    upper = -d - conv
    rhs = np.array(theta, dtype=float, copy=True)
    if source is not None:
        rhs = rhs + dt * np.asarray(source, dtype=float)

    # ghost node: theta[-1] = theta[1] - 2 dxi g
    upper[0] = -2.0 * d
    rhs[0] -= 2.0 * d * dxi * inflow_slope

    lower[n] = 0.0
    diag[n] = 1.0
    rhs[n] = 0.0

    out = tridiagonal_solve(lower, diag, upper, rhs)
    out[n] = 0.0
    return out


# --------------------------
# Plant operations
# --------------------------
def init_plant(cfg: ScenarioConfig, phys: PhysicalParams) -> PlantState:
    """Linear initial melt H * (s0 - x) with the matching interface velocity."""
    xi = plant_grid(cfg.grid_n)
    theta = cfg.H * cfg.s0 * (1.0 - xi)
    theta[-1] = 0.0
    sdot = -phys.beta * boundary_slope(theta) / cfg.s0
    return PlantState(t=0.0, s=cfg.s0, theta=theta, sdot=sdot)


def _melt_terms(theta: np.ndarray):
    dxi = 1.0 / (len(theta) - 1)
    # trapezoid integral and the last-cell difference quotient
    return float(trapezoid(theta, dx=dxi)), (theta[-1] - theta[-2]) / dxi


def interface_balance(theta: np.ndarray, length: float, velocity: float,
                      lag_velocity: float, alpha: float, beta: float) -> float:
    """Discrete Stefan condition for a field advanced on ``length`` at ``lag_velocity``.

    Zero exactly when the step from ``length`` with interface velocity
    ``velocity`` keeps (s / alpha) * int(theta) + s / beta in balance with
    the heat that entered at xi = 0. Tends to sdot / beta + u_x(s) as the
    grid is refined.
    """
    total, last = _melt_terms(theta)
    return (velocity / beta + last / length + (velocity - lag_velocity) * total / alpha
            + lag_velocity * theta[-2] / (2.0 * alpha))


def interface_velocity(theta: np.ndarray, length: float, lag_velocity: float,
                       alpha: float, beta: float) -> float:
    """Root of ``interface_balance`` in the velocity."""
    total, last = _melt_terms(theta)
    capacity = 1.0 / beta + total / alpha
    if not capacity > 0.0:
        raise SimulationBlowUp(
            f"melt undercooled below its latent heat (1/beta + int/alpha = {capacity!r})"
        )
    return (-last / length + lag_velocity * (total - 0.5 * theta[-2]) / alpha) / capacity


def step_plant(st: PlantState, qc: float, dt: float, phys: PhysicalParams,
               domain_length: float = math.inf) -> PlantState:
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt!r}")

    inflow = -(qc / phys.k) * st.s
    theta = advance_field(st.theta, st.s, st.sdot, inflow, dt, phys.alpha)
    if not np.all(np.isfinite(theta)):
        raise SimulationBlowUp(f"non-finite temperature at t={st.t + dt:.6g}")

    velocity = interface_velocity(theta, st.s, st.sdot, phys.alpha, phys.beta)
    s_new = st.s + dt * velocity
    if not math.isfinite(s_new) or s_new <= 0.0:
        raise SimulationBlowUp(f"interface collapsed at t={st.t + dt:.6g} (s={s_new!r})")
    if s_new >= DOMAIN_ABORT_FRACTION * domain_length:
        raise SimulationBlowUp(
            f"interface reached {s_new:.6g} m, beyond {DOMAIN_ABORT_FRACTION} of the domain"
        )

    sdot = (s_new - st.s) / dt
    return PlantState(t=st.t + dt, s=s_new, theta=theta, sdot=sdot)
