"""Contract/parameter types and the Merton payoff at maturity."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ParameterError(ValueError):
    """Invalid model parameters, rejected before any computation starts."""


class ContractViolation(ValueError):
    """A default-only formula was called for a non-defaulted firm."""


def _require(cond, msg):
    if not cond:
        raise ParameterError(msg)


@dataclass(frozen=True)
class ContractSpec:
    """Zero-coupon debt of face value ``face_value`` due at ``maturity``.

    ``steps`` is the number of simulation steps up to maturity; the default
    is a daily grid of 250 steps per year.
    """

    initial_value: float = 100.0
    face_value: float = 75.0
    maturity: float = 1.0
    steps: int = 250

    def __post_init__(self):
        _require(self.initial_value > 0, "initial_value must be > 0")
        _require(self.face_value > 0, "face_value must be > 0")
        _require(self.maturity > 0 and math.isfinite(self.maturity), "maturity must be > 0")
        _require(int(self.steps) == self.steps and self.steps >= 1, "steps must be an integer >= 1")

    @property
    def dt(self) -> float:
        return self.maturity / self.steps


@dataclass(frozen=True)
class DiffusionParams:
    mu: float = 0.05
    sigma: float = 0.15
    corr: float = 0.5

    def __post_init__(self):
        _require(math.isfinite(self.mu), "mu must be finite")
        _require(self.sigma > 0 and math.isfinite(self.sigma), "sigma must be > 0")
        _require(0.0 <= self.corr <= 1.0, "corr must lie in [0, 1]")


@dataclass(frozen=True)
class JumpParams:
    """Compound-Poisson jumps; each jump multiplies value by ``1 + Lambda``
    with ``1 + Lambda`` lognormal(``log_mean``, ``log_sd``)."""

    intensity: float = 0.005
    log_mean: float = 0.4
    log_sd: float = 0.3

    def __post_init__(self):
        _require(self.intensity >= 0 and math.isfinite(self.intensity), "intensity must be >= 0")
        _require(math.isfinite(self.log_mean), "log_mean must be finite")
        _require(self.log_sd > 0 and math.isfinite(self.log_sd), "log_sd must be > 0")

    @property
    def mean_jump(self) -> float:
        """E[Lambda] for a single jump."""
        return math.exp(self.log_mean + 0.5 * self.log_sd**2) - 1.0


@dataclass(frozen=True)
class GarchParams:
    """GARCH(1,1) on per-step returns.  ``initial_vol`` is per step."""

    alpha0: float
    alpha1: float
    beta1: float
    initial_vol: float

    def __post_init__(self):
        _require(self.alpha0 > 0, "alpha0 must be > 0")
        _require(self.alpha1 >= 0 and self.beta1 >= 0, "alpha1, beta1 must be >= 0")
        _require(self.alpha1 + self.beta1 < 1, "alpha1 + beta1 must be < 1")
        _require(self.initial_vol > 0, "initial_vol must be > 0")

    @classmethod
    def default(cls, sigma: float, dt: float, alpha1: float = 0.05, beta1: float = 0.90):
        """Stationary per-step variance equal to sigma**2 * dt, started there."""
        return cls(alpha0=(1.0 - alpha1 - beta1) * sigma**2 * dt,
                   alpha1=alpha1, beta1=beta1, initial_vol=sigma * math.sqrt(dt))

    @property
    def stationary_variance(self) -> float:
        return self.alpha0 / (1.0 - self.alpha1 - self.beta1)


PROCESSES = ("diffusion", "jump-diffusion", "garch")


@dataclass(frozen=True)
class ProcessParams:
    """Parameter set for one of the three asset processes.

    The diffusion block always carries drift and correlation; for GARCH its
    ``sigma`` only matters through the default GARCH parameters.
    """

    process: str = "diffusion"
    diffusion: DiffusionParams = field(default_factory=DiffusionParams)
    jumps: JumpParams | None = None
    garch: GarchParams | None = None

    def __post_init__(self):
        _require(self.process in PROCESSES, f"process must be one of {PROCESSES}")
        if self.process == "jump-diffusion":
            _require(self.jumps is not None, "jump-diffusion needs JumpParams")
        if self.process == "garch":
            _require(self.garch is not None, "garch needs GarchParams")


@dataclass(frozen=True)
class PortfolioSpec:
    size: int = 500
    contract: ContractSpec = field(default_factory=ContractSpec)

    def __post_init__(self):
        _require(int(self.size) == self.size and self.size >= 1, "portfolio size must be >= 1")


def loss_given_default(terminal_value: float, face_value: float) -> float:
    """(F - V) / F for a defaulted firm; recovery is one minus this."""
    if not face_value > 0:
        raise ParameterError("face_value must be > 0")
    if terminal_value < 0:
        raise ParameterError("terminal_value must be >= 0")
    if terminal_value >= face_value:
        raise ContractViolation(
            f"V(T)={terminal_value} >= F={face_value}: the firm did not default")
    return (face_value - terminal_value) / face_value


def individual_loss(terminal_value, face_value):
    """Loss at maturity, zero unless V(T) < F strictly.  Accepts arrays."""
    if not np.all(np.asarray(face_value) > 0):
        raise ParameterError("face_value must be > 0")
    shortfall = 1.0 - np.asarray(terminal_value, dtype=float) / face_value
    out = np.where(shortfall > 0.0, shortfall, 0.0)
    return float(out) if out.ndim == 0 else out
