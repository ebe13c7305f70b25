import numpy as np
import pytest

from stefanlab.control import feedback_law, field_integral
from stefanlab.observer import observer_gain
from stefanlab.params import PhysicalParams, ScenarioConfig
from stefanlab.transforms import (
    apply_direct,
    apply_inverse,
    controller_inverse,
    controller_transform,
    direct_matrix,
    inverse_matrix,
    kernel_P,
    kernel_Q,
    psi,
    triangular_weights,
)

S = 0.35
LAM = 0.001


def _error_field(n, s=S):
    """Smooth non-positive field vanishing at x = s."""
    x = np.linspace(0.0, s, n + 1)
    return -(s - x) * (1.0 + np.cos(3.0 * x / s))


def _round_trip_error(n, alpha):
    w = _error_field(n)
    back = apply_inverse(apply_direct(w, S, LAM, alpha), S, LAM, alpha)
    return np.max(np.abs(back - w)) / np.max(np.abs(w))


# ── Kernels ───────────────────────────────────────────────────────────────────

def test_kernel_on_the_diagonal(zinc):
    x = np.array([0.0, 0.1, 0.35])
    np.testing.assert_allclose(kernel_P(x, x, LAM, zinc.alpha), LAM * x / (2 * zinc.alpha), rtol=1e-14)
    np.testing.assert_allclose(kernel_Q(x, x, LAM, zinc.alpha), LAM * x / (2 * zinc.alpha), rtol=1e-14)


def test_observer_gain_is_scaled_kernel(zinc):
    x = np.linspace(0.0, S, 9)
    np.testing.assert_allclose(-zinc.alpha * kernel_P(x, S, LAM, zinc.alpha),
                               observer_gain(x, S, LAM, zinc.alpha), rtol=1e-12)


def test_inverse_kernel_below_direct(zinc):
    x = np.linspace(0.0, S, 20)[:-1]
    assert np.all(kernel_Q(x, S, LAM, zinc.alpha) < kernel_P(x, S, LAM, zinc.alpha))
    assert np.all(kernel_P(x, S, LAM, zinc.alpha) > 0)


def test_kernel_outside_triangle_raises(zinc):
    with pytest.raises(ValueError):
        kernel_P(0.3, 0.2, LAM, zinc.alpha)
    with pytest.raises(ValueError):
        kernel_Q(-0.1, 0.2, LAM, zinc.alpha)


# ── Observer-error transforms ─────────────────────────────────────────────────

def test_trapezoid_weights_integrate_constants():
    w = triangular_weights(8, 2.0)
    x = np.linspace(0.0, 2.0, 9)
    np.testing.assert_allclose(w @ np.ones(9), 2.0 - x, atol=1e-15)


def test_zero_gain_transforms_are_identity(zinc):
    np.testing.assert_array_equal(direct_matrix(10, S, 0.0, zinc.alpha), np.eye(11))
    np.testing.assert_array_equal(inverse_matrix(10, S, 0.0, zinc.alpha), np.eye(11))


def test_round_trip_at_working_resolution(zinc):
    assert _round_trip_error(200, zinc.alpha) < 1e-3


def test_round_trip_converges_second_order(zinc):
    errors = [_round_trip_error(n, zinc.alpha) for n in (50, 100, 200)]
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all(orders > 1.9)


def test_direct_transform_keeps_sign(zinc):
    w = _error_field(100)
    u = apply_direct(w, S, LAM, zinc.alpha)
    assert np.all(u <= 0.0)
    assert u[-1] == w[-1] == pytest.approx(0.0, abs=1e-15)
    # strictly more negative inside: the kernel is positive
    assert np.all(u[:-1] < w[:-1])


# ── Controller transforms ─────────────────────────────────────────────────────

def test_psi_origin():
    c, alpha, beta = 0.001, 4.5e-5, 1.6e-7
    assert psi(0.0, c, alpha, beta) == 0.0
    h = 1e-6
    slope = (psi(h, c, alpha, beta) - psi(-h, c, alpha, beta)) / (2 * h)
    assert slope == pytest.approx(c / beta, rel=1e-8)


def _controller_round_trip_error(n):
    s, c, alpha, beta, X = 1.0, 1.0, 1.0, 1.0, -0.5
    x = np.linspace(0.0, s, n + 1)
    u = (s - x) * np.exp(x)
    back = controller_inverse(controller_transform(u, X, s, c, alpha, beta), X, s, c, alpha, beta)
    return np.max(np.abs(back - u)) / np.max(np.abs(u))


def test_controller_round_trip_converges_second_order():
    errors = [_controller_round_trip_error(n) for n in (50, 100, 200)]
    assert errors[-1] < 1e-3
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all(orders > 1.9)


def test_target_field_vanishes_at_interface():
    x = np.linspace(0.0, 0.3, 101)
    u = 5.0 * (0.3 - x) ** 2
    w = controller_transform(u, -0.2, 0.3, 0.01, 0.02, 0.05)
    assert w[-1] == pytest.approx(0.0, abs=1e-15)


def test_feedback_flux_gives_insulated_target():
    phys = PhysicalParams(rho=1.0, cp=1.0, k=1.0, dh=1.0)
    s, sr = 1.0, 1.5
    cfg = ScenarioConfig(s0=s, H=1.0, Hhat=2.0, c=1.0, lam=0.0, sr=sr)
    X = s - sr
    # linear profile whose slope at x = 0 equals -q_c / k under the law
    a = -cfg.c * X / phys.beta / (1.0 + cfg.c * s ** 2 / (2.0 * phys.alpha))
    x = np.linspace(0.0, s, 401)
    u = a * (s - x)
    qc = feedback_law(field_integral(u, s), s, cfg, phys)
    assert -a == pytest.approx(-qc / phys.k, rel=1e-12)

    w = controller_transform(u, X, s, cfg.c, phys.alpha, phys.beta)
    dx = x[1]
    w_x0 = (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * dx)
    assert abs(w_x0) < 1e-4 * a
