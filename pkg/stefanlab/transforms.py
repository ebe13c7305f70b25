"""Backstepping kernels and the Volterra transforms built on them.

Every transform acts on a field sampled at x_i = i * s / N and integrates
over [x_i, s] with the trapezoid rule. The quadrature is assembled as an
upper-triangular matrix once per snapshot so several fields can share it.
"""

import numpy as np

from stefanlab.specfun import bessel_i1_ratio, bessel_j1_ratio


def _kernel_arg(x, y, lam, alpha):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < 0) or np.any(x > y):
        raise ValueError("kernel is defined on 0 <= x <= y")
    return x, y, (lam / alpha) * (y * y - x * x)


def kernel_P(x, y, lam, alpha):
    """(lam / alpha) * y * I1(z) / z, z^2 = (lam / alpha)(y^2 - x^2)."""
    x, y, z2 = _kernel_arg(x, y, lam, alpha)
    return (lam / alpha) * y * bessel_i1_ratio(z2)


def kernel_Q(x, y, lam, alpha):
    x, y, z2 = _kernel_arg(x, y, lam, alpha)
    return (lam / alpha) * y * bessel_j1_ratio(z2)


def triangular_weights(n: int, s: float) -> np.ndarray:
    """Trapezoid weights W[i, j] for int_{x_i}^{s} f(y) dy = sum_j W[i, j] f(x_j)."""
    dx = s / n
    w = np.triu(np.full((n + 1, n + 1), dx))
    w[np.diag_indices(n + 1)] = 0.5 * dx
    w[:, n] = np.where(np.arange(n + 1) < n, 0.5 * dx, 0.0)
    return w


def _grid(n: int, s: float):
    x = np.linspace(0.0, s, n + 1)
    rows, cols = np.meshgrid(x, x, indexing="ij")
    return x, rows, cols, np.triu(np.ones((n + 1, n + 1), dtype=bool))


def _volterra_matrix(kernel, n, s, lam, alpha, sign):
    _, rows, cols, upper = _grid(n, s)
    values = np.where(upper, kernel(np.minimum(rows, cols), cols, lam, alpha), 0.0)
    return np.eye(n + 1) + sign * triangular_weights(n, s) * values


# --------------------------
# Observer-error pair (P, Q)
# --------------------------
def direct_matrix(n: int, s: float, lam: float, alpha: float) -> np.ndarray:
    return _volterra_matrix(kernel_P, n, s, lam, alpha, 1.0)


def inverse_matrix(n: int, s: float, lam: float, alpha: float) -> np.ndarray:
    return _volterra_matrix(kernel_Q, n, s, lam, alpha, -1.0)


def apply_direct(w, s, lam, alpha):
    """u(x) = w(x) + int_x^s P(x, y) w(y) dy."""
    w = np.asarray(w, dtype=float)
    return direct_matrix(len(w) - 1, s, lam, alpha) @ w


def apply_inverse(u, s, lam, alpha):
    """w(x) = u(x) - int_x^s Q(x, y) u(y) dy."""
    u = np.asarray(u, dtype=float)
    return inverse_matrix(len(u) - 1, s, lam, alpha) @ u


# --------------------------
# Controller pair
# --------------------------
def psi(x, c, alpha, beta):
    """(c / beta) sqrt(alpha / c) sin(sqrt(c / alpha) x); odd in x."""
    return (c / beta) * np.sqrt(alpha / c) * np.sin(np.sqrt(c / alpha) * np.asarray(x, dtype=float))


def controller_matrix(n: int, s: float, c: float, alpha: float) -> np.ndarray:
    _, rows, cols, upper = _grid(n, s)
    values = np.where(upper, rows - cols, 0.0)
    return np.eye(n + 1) - (c / alpha) * triangular_weights(n, s) * values


def controller_inverse_matrix(n: int, s: float, c: float, alpha: float, beta: float) -> np.ndarray:
    _, rows, cols, upper = _grid(n, s)
    values = np.where(upper, psi(rows - cols, c, alpha, beta), 0.0)
    return np.eye(n + 1) + (beta / alpha) * triangular_weights(n, s) * values


def controller_transform(u, X, s, c, alpha, beta):
    """w(x) = u(x) - (c/alpha) int_x^s (x - y) u(y) dy + (c/beta)(s - x) X."""
    u = np.asarray(u, dtype=float)
    n = len(u) - 1
    x = np.linspace(0.0, s, n + 1)
    return controller_matrix(n, s, c, alpha) @ u + (c / beta) * (s - x) * X


def controller_inverse(w, X, s, c, alpha, beta):
    """u(x) = w(x) + (beta/alpha) int_x^s psi(x - y) w(y) dy + psi(x - s) X."""
    w = np.asarray(w, dtype=float)
    n = len(w) - 1
    x = np.linspace(0.0, s, n + 1)
    return controller_inverse_matrix(n, s, c, alpha, beta) @ w + psi(x - s, c, alpha, beta) * X
