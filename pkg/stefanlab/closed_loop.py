"""Closed-loop simulation shared by the CLI and the tests.

Step order at t_i = i * dt:

    measure Y(t_i) -> observer t_{i-1} -> t_i -> q_c(t_i) -> plant t_i -> t_{i+1}

The observer always runs, so the estimation error is logged in both modes;
the mode only selects which law drives the plant.
"""

import logging
import math
import time
from dataclasses import asdict, dataclass
from typing import List, Optional

import numpy as np
import pandas as pd

from stefanlab.control import internal_energy, output_feedback, state_feedback
from stefanlab.diagnostics import (
    FLAGS,
    ConstraintReport,
    h1_norm_sq,
    lyapunov_constants,
    lyapunov_sample,
    monitor_constraints,
)
from stefanlab.observer import ObserverState, init_observer, step_observer
from stefanlab.params import PhysicalParams, ScenarioConfig
from stefanlab.plant import (
    NumericalError,
    PlantState,
    SimulationBlowUp,
    boundary_slope,
    convection_number,
    init_plant,
    step_plant,
)

logger = logging.getLogger(__name__)

CHECKPOINT_COLUMNS = ["t", "s", "X", "v1_tilde", "vtot", "v", "wtilde_max", "what_at_s", "vtot_bound"]


@dataclass
class TraceRecord:
    t: float
    s: float
    sdot: float
    qc: float
    T0: float
    That0: float
    Ttilde0: float
    u_min: float
    err_max: float
    err_x_s: float
    h1_u: float
    h1_err: float
    energy: float
    flux_integral: float
    V: float = math.nan
    Vtot: float = math.nan


# per-row constraint flags follow the recorded quantities
TRACE_COLUMNS = list(TraceRecord.__dataclass_fields__) + list(FLAGS)


@dataclass
class RunResult:
    trace: pd.DataFrame
    checkpoints: pd.DataFrame
    plant: PlantState
    observer: ObserverState
    failed: bool = False
    error: str = ""
    wall_time: float = 0.0
    constraints: Optional[ConstraintReport] = None


def _record(t: float, plant: PlantState, ob: ObserverState, qc: float, flux: float,
            cfg: ScenarioConfig, phys: PhysicalParams) -> TraceRecord:
    err = plant.theta - ob.theta_hat
    return TraceRecord(
        t=t,
        s=plant.s,
        sdot=plant.sdot,
        qc=qc,
        T0=phys.tm + plant.theta[0],
        That0=phys.tm + ob.theta_hat[0],
        Ttilde0=float(err[0]),
        u_min=float(np.min(plant.theta)),
        err_max=float(np.max(err)),
        err_x_s=(boundary_slope(plant.theta) - boundary_slope(ob.theta_hat)) / plant.s,
        h1_u=h1_norm_sq(plant.theta, plant.s, cfg.h1_include_l2),
        h1_err=h1_norm_sq(err, plant.s, cfg.h1_include_l2),
        energy=internal_energy(plant, phys),
        flux_integral=flux,
    )


def run_closed_loop(cfg: ScenarioConfig, phys: PhysicalParams,
                    checkpoint_every: Optional[int] = None) -> RunResult:
    every = checkpoint_every or cfg.checkpoint_every
    consts = lyapunov_constants(cfg, phys)

    plant = init_plant(cfg, phys)
    ob = init_observer(cfg, phys)
    rows: List[TraceRecord] = []
    checkpoints: List[dict] = []
    flux = 0.0
    qc_prev = 0.0
    vtot0 = None
    warned = False
    failed, error = False, ""

    logger.info("closed loop start: mode=%s steps=%d dt=%g N=%d",
                cfg.mode, cfg.n_steps, cfg.dt, cfg.grid_n)
    started = time.perf_counter()
    try:
        for i in range(cfg.n_steps + 1):
            t = i * cfg.dt
            y = plant.s
            if i > 0:
                ob = step_observer(ob, y, qc_prev, cfg.dt, cfg, phys)

            if cfg.mode == "state_feedback":
                qc = state_feedback(plant, cfg, phys).qc
            else:
                qc = output_feedback(ob, y, cfg, phys).qc

            row = _record(t, plant, ob, qc, flux, cfg, phys)
            if i % every == 0:
                sample = lyapunov_sample(t, plant.s, plant.theta, ob.theta_hat, cfg, phys, consts)
                if vtot0 is None:
                    vtot0 = sample.vtot
                row.V, row.Vtot = sample.v, sample.vtot
                cp = asdict(sample)
                cp.update(s=plant.s, X=plant.s - cfg.sr,
                          vtot_bound=math.exp(consts.a * cfg.sr) * vtot0 * math.exp(-consts.b * t))
                checkpoints.append(cp)
            rows.append(row)

            if i == cfg.n_steps:
                break
            if not warned and convection_number(plant.s, plant.sdot, cfg.dt, cfg.grid_n) > 0.5:
                logger.warning("convection number above 0.5 at t=%.6g; the lagged coefficient keeps "
                               "the step stable but adds first-order error", t)
                warned = True
            plant = step_plant(plant, qc, cfg.dt, phys, cfg.domain_length)
            flux += qc * cfg.dt / phys.k
            qc_prev = qc
    except (SimulationBlowUp, NumericalError) as exc:
        failed, error = True, str(exc)
        logger.error("run aborted after %d rows: %s", len(rows), exc)

    wall = time.perf_counter() - started
    logger.info("closed loop end: %d rows in %.2f s", len(rows), wall)
    records = pd.DataFrame([asdict(r) for r in rows], columns=list(TraceRecord.__dataclass_fields__))
    constraints = monitor_constraints(records, cfg)
    trace = records.join(constraints.flags.drop(columns="t"))[TRACE_COLUMNS]
    cp_frame = pd.DataFrame(checkpoints, columns=CHECKPOINT_COLUMNS)
    return RunResult(trace=trace, checkpoints=cp_frame, plant=plant, observer=ob,
                     failed=failed, error=error, wall_time=wall, constraints=constraints)
