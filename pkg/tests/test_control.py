import numpy as np
import pandas as pd
import pytest

from stefanlab.control import (
    energy_flux_residual,
    field_integral,
    internal_energy,
    kernel_integral,
    output_feedback,
    qc_ode_residual,
    state_feedback,
)
from stefanlab.observer import ObserverState, init_observer
from stefanlab.params import ScenarioConfig, initial_heat_flux
from stefanlab.plant import PlantState, init_plant, plant_grid


def _cfg(**overrides):
    base = dict(s0=0.01, H=100.0, Hhat=1000.0, c=0.001, lam=0.001, sr=0.35, grid_n=200)
    base.update(overrides)
    return ScenarioConfig(**base)


# ── Feedback laws ─────────────────────────────────────────────────────────────

def test_equilibrium_gives_zero_flux(zinc):
    cfg = _cfg()
    st = PlantState(t=0.0, s=cfg.sr, theta=np.zeros(201))
    assert state_feedback(st, cfg, zinc).qc == 0.0
    ob = ObserverState(t=0.0, y_prev=cfg.sr, theta_hat=np.zeros(201))
    assert output_feedback(ob, cfg.sr, cfg, zinc).qc == 0.0


def test_state_feedback_zinc_initial_value(zinc):
    cfg = _cfg()
    out = state_feedback(init_plant(cfg, zinc), cfg, zinc)
    expected = -0.001 * 116.0 * (100.0 * 0.01 ** 2 / 2 / zinc.alpha + (0.01 - 0.35) / zinc.beta)
    # trapezoid is exact for the linear profile
    assert out.qc == pytest.approx(expected, rel=1e-12)
    assert out.qc == pytest.approx(2.50086e5, rel=1e-5)
    assert out.qc == pytest.approx(initial_heat_flux(cfg.with_overrides(mode="state_feedback"), zinc), rel=1e-12)


def test_output_feedback_zinc_initial_value(zinc):
    cfg = _cfg()
    out = output_feedback(init_observer(cfg, zinc), cfg.s0, cfg, zinc)
    assert out.qc == pytest.approx(initial_heat_flux(cfg, zinc), rel=1e-12)
    assert out.qc == pytest.approx(2.49971e5, rel=1e-5)


def test_empty_melt_below_setpoint_is_heated(zinc):
    cfg = _cfg()
    st = PlantState(t=0.0, s=0.1, theta=np.zeros(201))
    qc = state_feedback(st, cfg, zinc).qc
    assert qc == pytest.approx(cfg.c * zinc.k * (cfg.sr - 0.1) / zinc.beta, rel=1e-12)
    assert qc > 0


def test_laws_coincide_on_identical_fields(zinc):
    cfg = _cfg(grid_n=64)
    st = init_plant(cfg, zinc)
    ob = ObserverState(t=0.0, y_prev=st.s, theta_hat=st.theta.copy())
    assert output_feedback(ob, st.s, cfg, zinc).qc == state_feedback(st, cfg, zinc).qc


def test_warmer_field_lowers_flux(zinc):
    cfg = _cfg(grid_n=32)
    st = init_plant(cfg, zinc)
    hotter = PlantState(t=0.0, s=st.s, theta=st.theta.copy())
    hotter.theta[5] += 1.0
    assert state_feedback(hotter, cfg, zinc).qc < state_feedback(st, cfg, zinc).qc


# ── Energy ────────────────────────────────────────────────────────────────────

def test_internal_energy_of_empty_melt(zinc):
    st = PlantState(t=0.0, s=0.2, theta=np.zeros(11))
    assert internal_energy(st, zinc) == pytest.approx(0.2 / zinc.beta)


def test_internal_energy_zinc_initial(zinc):
    st = init_plant(_cfg(), zinc)
    expected = 5e-3 / zinc.alpha + 0.01 / zinc.beta
    assert internal_energy(st, zinc) == pytest.approx(expected, rel=1e-12)
    assert internal_energy(st, zinc) == pytest.approx(63522.7, rel=1e-5)


def test_field_integral_exact_for_linear():
    theta = 3.0 * (1.0 - plant_grid(7))
    assert field_integral(theta, 0.5) == pytest.approx(0.75)


def test_energy_flux_residual_from_columns_and_from_qc():
    t = np.arange(5.0)
    qc = np.full(5, 2.0)
    k = 4.0
    energy = 1.0 + 0.5 * t
    frame = pd.DataFrame({"t": t, "qc": qc, "energy": energy})
    assert energy_flux_residual(frame, k) == pytest.approx(0.0, abs=1e-15)
    frame["flux_integral"] = 0.5 * t * 1.1
    assert energy_flux_residual(frame) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        energy_flux_residual(frame.drop(columns="flux_integral"))


# ── q_c differential inequality ───────────────────────────────────────────────

def _trace(qc, err_x, s=0.05, dt=1.0):
    n = len(qc)
    return pd.DataFrame({"t": np.arange(n) * dt, "qc": qc, "s": np.full(n, s), "err_x_s": err_x})


def test_zero_error_trace_decays_exponentially(zinc):
    cfg = _cfg()
    t = np.arange(20.0)
    qc = 100.0 * np.exp(-cfg.c * t)
    check = qc_ode_residual(_trace(qc, np.zeros(20)), cfg, zinc)
    np.testing.assert_allclose(check.residual, check.margin)
    assert np.max(np.abs(check.residual)) < 1e-3 * 100.0 * cfg.c
    assert check.inequality_ok


def test_constant_flux_without_gain_has_no_residual(zinc):
    # the error term carries the factor c*k, so it vanishes with c
    cfg = _cfg(c=0.0)
    check = qc_ode_residual(_trace(np.full(6, 7.0), np.full(6, 3.0)), cfg, zinc)
    assert np.all(check.residual == 0.0)
    assert check.inequality_ok


def test_error_slope_enters_with_kernel_weight(zinc):
    cfg = _cfg()
    err = np.full(6, 2.0)
    qc = np.full(6, 50.0)
    check = qc_ode_residual(_trace(qc, err), cfg, zinc)
    weight = 1.0 + kernel_integral(0.05, cfg.lam, zinc.alpha)
    np.testing.assert_allclose(check.residual, cfg.c * 50.0 - cfg.c * zinc.k * weight * 2.0)


def test_fast_drop_violates_inequality(zinc):
    cfg = _cfg()
    qc = 100.0 * np.exp(-0.01 * np.arange(10.0))
    assert not qc_ode_residual(_trace(qc, np.zeros(10)), cfg, zinc).inequality_ok


def test_kernel_integral_limits(zinc):
    assert kernel_integral(0.3, 0.0, zinc.alpha) == 0.0
    # small argument: P ~ (lam / alpha) s / 2
    lam = 1e-9
    assert kernel_integral(0.2, lam, zinc.alpha) == pytest.approx(lam / zinc.alpha * 0.2 ** 2 / 2, rel=1e-6)


def test_short_trace_rejected(zinc):
    with pytest.raises(ValueError):
        qc_ode_residual(_trace(np.ones(2), np.zeros(2)), _cfg(), zinc)
