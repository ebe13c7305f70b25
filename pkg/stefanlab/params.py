"""Material constants, scenario configuration and the pre-run restrictions."""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

logger = logging.getLogger(__name__)

MODES = ("output_feedback", "state_feedback")


class ConfigurationError(ValueError):
    """Invalid physical or scenario parameters, or a malformed config file."""


# --------------------------
# Physical parameters
# --------------------------
@dataclass(frozen=True)
class PhysicalParams:
    rho: float
    cp: float
    k: float
    dh: float
    tm: float = 0.0

    def validate(self) -> None:
        for name in ("rho", "cp", "k", "dh"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ConfigurationError(f"{name} must be positive, got {value!r}")

    @property
    def alpha(self) -> float:
        return self.k / (self.rho * self.cp)

    @property
    def beta(self) -> float:
        return self.k / (self.rho * self.dh)


# Zinc strip; k in W/(m K), latent heat in J/kg.
ZINC = PhysicalParams(rho=6570.0, cp=389.5687, k=116.0, dh=111961.0, tm=692.68)


def derive_diffusivities(p: PhysicalParams) -> Tuple[float, float]:
    """Return ``(alpha, beta)`` after checking that every constant is positive."""
    p.validate()
    return p.alpha, p.beta


# --------------------------
# Scenario configuration
# --------------------------
@dataclass(frozen=True)
class ScenarioConfig:
    s0: float
    H: float
    Hhat: float
    c: float
    lam: float
    sr: float
    grid_n: int = 200
    dt: float = 1.0
    t_end: float = 10000.0
    mode: str = "output_feedback"
    domain_length: float = math.inf
    checkpoint_every: int = 50
    ydot_smoothing: float = 0.0
    grid_tol_const: float = 1e-3
    h1_include_l2: bool = True
    lyapunov_d: Optional[float] = None

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def grid_tolerance(self) -> float:
        """Grid tolerance C*(dxi^2 + dt) used by every sign monitor."""
        return self.grid_tol_const * ((1.0 / self.grid_n) ** 2 + self.dt)

    def with_overrides(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


def lambda_upper_bound(cfg: ScenarioConfig, alpha: float) -> float:
    """Largest admissible observer gain, (4 alpha / s0^2)(1 - H/Hhat)."""
    if cfg.Hhat <= 0:
        raise ConfigurationError(f"Hhat must be positive, got {cfg.Hhat!r}")
    if cfg.Hhat < cfg.H:
        raise ConfigurationError(f"Hhat={cfg.Hhat!r} is below H={cfg.H!r}")
    return 4.0 * alpha / cfg.s0 ** 2 * (1.0 - cfg.H / cfg.Hhat)


def setpoint_lower_bound(cfg: ScenarioConfig, alpha: float, beta: float) -> float:
    return cfg.s0 + beta * cfg.s0 ** 2 * cfg.Hhat / (2.0 * alpha)


def assumption_setpoint_bound(cfg: ScenarioConfig, alpha: float, beta: float) -> float:
    # Energy-based restriction for the state-feedback loop with the linear
    # initial profile H*(s0 - x).
    return cfg.s0 + beta * cfg.s0 ** 2 * cfg.H / (2.0 * alpha)


def initial_heat_flux(cfg: ScenarioConfig, p: PhysicalParams) -> float:
    """Closed-form q_c(0) of the configured mode for the linear initial profiles."""
    slope = cfg.H if cfg.mode == "state_feedback" else cfg.Hhat
    integral = slope * cfg.s0 ** 2 / 2.0
    return -cfg.c * p.k * (integral / p.alpha + (cfg.s0 - cfg.sr) / p.beta)


# --------------------------
# Validation report
# --------------------------
@dataclass
class CheckResult:
    name: str
    passed: bool
    value: Optional[float] = None
    bound: Optional[float] = None
    detail: str = ""

    def format(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        parts = [f"[{status}] {self.name}"]
        if self.value is not None:
            parts.append(f"value={self.value:.9g}")
        if self.bound is not None:
            parts.append(f"bound={self.bound:.9g}")
        if self.detail:
            parts.append(self.detail)
        return "  ".join(parts)


@dataclass
class ValidationReport:
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(check.passed for check in self.checks)

    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]

    def get(self, name: str) -> CheckResult:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    def format(self) -> str:
        lines = [check.format() for check in self.checks]
        lines.append("validation: " + ("ok" if self.ok else "FAILED"))
        return "\n".join(lines)


def _numerics_problems(cfg: ScenarioConfig) -> List[str]:
    problems = []
    if not cfg.s0 > 0:
        problems.append("s0 must be positive")
    if cfg.grid_n < 8:
        problems.append("grid_n must be at least 8")
    if not cfg.dt > 0:
        problems.append("dt must be positive")
    if not cfg.t_end > cfg.dt:
        problems.append("t_end must exceed dt")
    if cfg.mode not in MODES:
        problems.append(f"mode must be one of {', '.join(MODES)}")
    if not cfg.c > 0:
        problems.append("c must be positive")
    if cfg.H < 0:
        problems.append("H must be non-negative")
    if not 0.0 <= cfg.ydot_smoothing < 1.0:
        problems.append("ydot_smoothing must lie in [0, 1)")
    if cfg.checkpoint_every < 1:
        problems.append("checkpoint_every must be at least 1")
    if not cfg.domain_length > cfg.s0:
        problems.append("domain_length must exceed s0")
    return problems


def validate_scenario(cfg: ScenarioConfig, p: PhysicalParams) -> ValidationReport:
    """Evaluate every restriction the closed loop relies on.

    Parameter values never raise here; each restriction becomes a named
    ``CheckResult``. Strict inequalities, no slack.
    """
    report = ValidationReport()

    try:
        alpha, beta = derive_diffusivities(p)
    except ConfigurationError as exc:
        report.checks.append(CheckResult("physical", False, detail=str(exc)))
        return report
    report.checks.append(
        CheckResult("physical", True, detail=f"alpha={alpha:.9g} beta={beta:.9g}")
    )

    problems = _numerics_problems(cfg)
    report.checks.append(CheckResult("numerics", not problems, detail="; ".join(problems)))
    if not cfg.s0 > 0:
        return report

    report.checks.append(
        CheckResult("initial_estimate", cfg.Hhat > 0, value=cfg.Hhat, bound=0.0,
                    detail="initial estimate Hhat*(s0 - x) must be a positive slope")
    )
    report.checks.append(
        CheckResult("hhat_gt_h", cfg.Hhat > cfg.H, value=cfg.Hhat, bound=cfg.H)
    )

    try:
        lam_bound = lambda_upper_bound(cfg, alpha)
    except ConfigurationError as exc:
        report.checks.append(CheckResult("lambda_bound", False, value=cfg.lam, detail=str(exc)))
    else:
        report.checks.append(
            CheckResult("lambda_bound", 0.0 <= cfg.lam < lam_bound, value=cfg.lam, bound=lam_bound)
        )

    sr_bound = setpoint_lower_bound(cfg, alpha, beta)
    report.checks.append(CheckResult("setpoint_bound", cfg.sr > sr_bound, value=cfg.sr, bound=sr_bound))
    sr_assumption = assumption_setpoint_bound(cfg, alpha, beta)
    report.checks.append(
        CheckResult("assumption_setpoint", cfg.sr > sr_assumption, value=cfg.sr, bound=sr_assumption)
    )

    qc0 = initial_heat_flux(cfg, p)
    report.checks.append(CheckResult("initial_heat_flux", qc0 > 0, value=qc0, bound=0.0))

    for check in report.failures():
        logger.debug("validation check failed: %s", check.format())
    return report
