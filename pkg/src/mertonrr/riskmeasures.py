"""Expected Loss, VaR and ETL.

``alpha`` is the tail mass throughout: ``alpha = 0.01`` is the 99% level.
Losses are large when the market return is low, so the analytic VaR uses
the ``alpha``-quantile of the market return.  Sample-based routes use the
lower order statistic at ``ceil((1 - alpha) n)`` and average everything at
or above it for the ETL.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .analytics import MarketReturnLaw, loss_given_xm_total, structural_loss_total, _bval
from .model import ContractSpec
from .numerics import DomainError, QuadratureSpec, integrate, norm_pdf_array, std_normal_quantile

METHODS = ("analytic-xm", "analytic-xm-empirical", "analytic-pd-empirical", "empirical")


class InsufficientSamplesError(ValueError):
    pass


@dataclass(frozen=True)
class RiskReport:
    expected_loss: float
    var: float
    etl: float
    alpha: float
    method: str

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")

    @property
    def confidence(self) -> float:
        return 1.0 - self.alpha

    def as_dict(self) -> dict:
        return {"method": self.method, "alpha": self.alpha, "confidence": self.confidence,
                "expected_loss": self.expected_loss, "var": self.var, "etl": self.etl}

    def to_text(self) -> str:
        return "".join(f"{k} = {_s(v)}\n" for k, v in self.as_dict().items())

    CSV_FIELDS = ("method", "alpha", "confidence", "expected_loss", "var", "etl")

    def csv_row(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerow(_s(v) for v in self.as_dict().values())
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "RiskReport":
        d = {}
        for line in text.splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            k, _, v = line.partition("=")
            d[k.strip()] = v.strip()
        return cls(float(d["expected_loss"]), float(d["var"]), float(d["etl"]),
                   float(d["alpha"]), d["method"])


def _s(v):
    return repr(float(v)) if isinstance(v, float) else str(v)


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")


def _loss_of_z(law, contract, b):
    def f(z):
        return loss_given_xm_total(law.x_of(z), contract, b) * norm_pdf_array(z)
    return f


def var_analytic(alpha: float, law: MarketReturnLaw, contract: ContractSpec, b) -> float:
    """Loss at the ``alpha``-quantile of the market return."""
    _check_alpha(alpha)
    b = _bval(b)
    return float(loss_given_xm_total(law.quantile(alpha), contract, b))


def etl_analytic(alpha: float, law: MarketReturnLaw, contract: ContractSpec, b,
                 quad: QuadratureSpec = QuadratureSpec()) -> float:
    """Mean loss over the worst ``alpha`` of market outcomes (integrated in z)."""
    _check_alpha(alpha)
    b = _bval(b)
    z_alpha = std_normal_quantile(alpha)
    return integrate(_loss_of_z(law, contract, b), -math.inf, z_alpha, quad, vectorized=True) / alpha


def el_analytic(law: MarketReturnLaw, contract: ContractSpec, b,
                quad: QuadratureSpec = QuadratureSpec()) -> float:
    b = _bval(b)
    return integrate(_loss_of_z(law, contract, b), -math.inf, math.inf, quad, vectorized=True)


def analytic_report(alpha, law, contract, b, quad: QuadratureSpec = QuadratureSpec()) -> RiskReport:
    return RiskReport(el_analytic(law, contract, b, quad), var_analytic(alpha, law, contract, b),
                      etl_analytic(alpha, law, contract, b, quad), alpha, "analytic-xm")


def empirical_quantile(samples, q: float) -> float:
    """Lower order statistic at rank ceil(q n) (1-based), i.e. the left-continuous inverse."""
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    if s.size == 0:
        raise InsufficientSamplesError("no samples")
    if not 0.0 < q <= 1.0:
        raise DomainError("q must lie in (0, 1]")
    rank = max(1, math.ceil(q * s.size - 1e-9 * q * s.size))
    return float(s[rank - 1])


def _tail_report(losses, alpha, method):
    _check_alpha(alpha)
    losses = np.asarray(losses, dtype=float).ravel()
    need = math.ceil(1.0 / alpha - 1e-9)
    if losses.size < need:
        raise InsufficientSamplesError(f"need at least {need} samples for alpha={alpha}, "
                                       f"got {losses.size}")
    var = empirical_quantile(losses, 1.0 - alpha)
    tail = losses[losses >= var]
    # a mean of values >= var cannot be below it; guard the last-bit rounding
    etl = max(var, math.fsum(tail) / tail.size)
    return RiskReport(math.fsum(losses) / losses.size, var, etl, alpha, method)


def risk_empirical(alpha: float, losses) -> RiskReport:
    """Direct estimator on realized portfolio losses."""
    return _tail_report(losses, alpha, "empirical")


def risk_from_pd_samples(alpha: float, pd_samples, b) -> RiskReport:
    """Structural loss applied to sampled default probabilities.

    L(P_D) is increasing, so the VaR is L at the upper ``alpha`` quantile of
    P_D and the tail average runs over samples with P_D at or above it.
    """
    p = np.asarray(pd_samples, dtype=float)
    return _tail_report(structural_loss_total(p, _bval(b)), alpha, "analytic-pd-empirical")


def risk_from_xm_samples(alpha: float, xm_samples, contract: ContractSpec, b) -> RiskReport:
    """Diffusion closed-form loss L(x_m) evaluated on sampled market returns."""
    x = np.asarray(xm_samples, dtype=float)
    return _tail_report(loss_given_xm_total(x, contract, _bval(b)), alpha, "analytic-xm-empirical")


def standard_errors(losses, alpha: float) -> tuple[float, float, float]:
    """Rough MC standard errors for (EL, VaR, ETL) from one sample.

    EL uses the sample sd; VaR uses the binomial order-statistic interval;
    ETL uses the tail sd over the tail count.
    """
    s = np.sort(np.asarray(losses, dtype=float).ravel())
    n = s.size
    se_el = float(np.std(s, ddof=1) / math.sqrt(n))
    q = 1.0 - alpha
    half = math.sqrt(n * q * (1 - q))
    lo = s[max(0, int(math.floor(n * q - half)) - 1)]
    hi = s[min(n - 1, int(math.ceil(n * q + half)) - 1)]
    se_var = float(0.5 * (hi - lo))
    tail = s[s >= empirical_quantile(s, q)]
    se_etl = float(np.std(tail, ddof=1) / math.sqrt(tail.size)) if tail.size > 1 else 0.0
    return se_el, se_var, se_etl
