import os
import sys

_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, _ROOT)

import pytest

from stefanlab.closed_loop import run_closed_loop
from stefanlab.params import ZINC, ScenarioConfig



@pytest.fixture(scope="session")
def zinc():
    return ZINC


@pytest.fixture(scope="session")
def zinc_cfg():
    return ScenarioConfig(s0=0.01, H=100.0, Hhat=1000.0, c=0.001, lam=0.001, sr=0.35,
                          grid_n=200, dt=1.0, t_end=10000.0)


@pytest.fixture(scope="session")
def zinc_run(zinc, zinc_cfg):
    return run_closed_loop(zinc_cfg, zinc)


@pytest.fixture(scope="session")
def zinc_state_run(zinc, zinc_cfg):
    return run_closed_loop(zinc_cfg.with_overrides(mode="state_feedback"), zinc)
