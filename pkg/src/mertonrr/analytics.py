"""Closed-form results for the correlated diffusion.

Conditioned on the market return ``x_m`` a firm's log terminal value is
normal, which gives default probability, expected loss given default and
portfolio loss in closed form.  Eliminating ``x_m`` leaves a relation
between recovery (or loss) and default probability with one parameter,
``B = sqrt((1 - c) sigma^2 T)``.

All functions accept scalars or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ContractSpec, DiffusionParams, ParameterError
from .numerics import DomainError
from .numerics.normal import norm_cdf_array, norm_pdf_array, norm_ppf_array

PD_CLAMP = 1e-12


class DegenerateError(ValueError):
    """The conditional law collapses (no idiosyncratic risk, or c*sigma^2*T = 0)."""


class UndefinedLGDError(ArithmeticError):
    """Default probability underflowed to zero; loss given default is undefined."""


class GridError(ValueError):
    """Density transform needs a finer grid (derivative vanished)."""


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class StructuralParam:
    b: float

    def __post_init__(self):
        if not self.b > 0:
            raise ParameterError("B must be > 0")

    def __float__(self):
        return float(self.b)


@dataclass(frozen=True)
class MarketReturnLaw:
    """Shifted lognormal law of X_m: ln(1 + X_m) ~ N(mu T - c sigma^2 T / 2, c sigma^2 T)."""

    mu: float
    sigma: float
    corr: float
    maturity: float

    def __post_init__(self):
        if not self.corr * self.sigma**2 * self.maturity > 0:
            raise DegenerateError("market return law needs c * sigma^2 * T > 0")

    @classmethod
    def from_params(cls, params: DiffusionParams, contract: ContractSpec) -> "MarketReturnLaw":
        return cls(params.mu, params.sigma, params.corr, contract.maturity)

    @property
    def log_mean(self) -> float:
        return self.mu * self.maturity - 0.5 * self.corr * self.sigma**2 * self.maturity

    @property
    def log_sd(self) -> float:
        return math.sqrt(self.corr * self.sigma**2 * self.maturity)

    def z_of(self, x_m):
        """Standardised market shock for a given market return."""
        return (np.log1p(x_m) - self.log_mean) / self.log_sd

    def x_of(self, z):
        return np.expm1(self.log_mean + self.log_sd * np.asarray(z, dtype=float))

    def pdf(self, x_m):
        x = np.asarray(x_m, dtype=float)
        _check_xm(x)
        return _out(norm_pdf_array(self.z_of(x)) / (self.log_sd * (1.0 + x)))

    def cdf(self, x_m):
        x = np.asarray(x_m, dtype=float)
        _check_xm(x)
        return _out(norm_cdf_array(self.z_of(x)))

    def quantile(self, q):
        q = np.asarray(q, dtype=float)
        if np.any((q <= 0) | (q >= 1)):
            raise DomainError("quantile level must lie in (0, 1)")
        return _out(self.x_of(norm_ppf_array(q)))


def _check_xm(x):
    if np.any(~(x > -1.0)):
        raise DomainError("market return must exceed -1")


def compound_b(corr: float, sigma: float, maturity: float) -> StructuralParam:
    if not (0.0 <= corr <= 1.0 and sigma > 0 and maturity > 0):
        raise ParameterError("need 0 <= c <= 1, sigma > 0, T > 0")
    b = math.sqrt((1.0 - corr) * sigma**2 * maturity)
    if b == 0.0:
        raise DegenerateError("c = 1 leaves no idiosyncratic risk: B = 0")
    return StructuralParam(b)


def _bval(b):
    b = float(b)
    if not b > 0:
        raise DegenerateError("B must be > 0")
    return b


def log_distance_a(x_m, contract: ContractSpec):
    """A = ln(F / V0) - ln(1 + x_m)."""
    x = np.asarray(x_m, dtype=float)
    _check_xm(x)
    return _out(math.log(contract.face_value / contract.initial_value) - np.log1p(x))


def _pd_from_a(a, b):
    return norm_cdf_array((a + 0.5 * b * b) / b)


def _loss_from_a(a, b):
    # P_D - e^{-A} Phi((A - B^2/2)/B), with the limits A -> +-inf handled
    a = np.asarray(a, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        tail = np.exp(-a) * norm_cdf_array((a - 0.5 * b * b) / b)
        out = _pd_from_a(a, b) - tail
    out = np.where(np.isposinf(a), 1.0, out)
    return np.clip(np.nan_to_num(out, nan=0.0), 0.0, 1.0)


def default_prob_given_xm(x_m, contract: ContractSpec, b):
    """P_D(x_m) = Phi((A + B^2/2) / B)."""
    return _out(_pd_from_a(np.asarray(log_distance_a(x_m, contract)), _bval(b)))


def expected_loss_given_xm(x_m, contract: ContractSpec, b):
    """Portfolio loss <L(x_m)> = P_D * <L*>, for an infinitely granular portfolio."""
    return _out(_loss_from_a(log_distance_a(x_m, contract), _bval(b)))


def expected_lgd_given_xm(x_m, contract: ContractSpec, b):
    """Expected loss given default conditional on x_m."""
    b = _bval(b)
    a = np.asarray(log_distance_a(x_m, contract))
    pd = _pd_from_a(a, b)
    if np.any(pd == 0.0):
        raise UndefinedLGDError("P_D(x_m) underflowed to 0; LGD undefined there")
    return _out(1.0 - np.exp(-a) * norm_cdf_array((a - 0.5 * b * b) / b) / pd)


def expected_recovery_given_xm(x_m, contract: ContractSpec, b):
    b = _bval(b)
    a = np.asarray(log_distance_a(x_m, contract))
    pd = _pd_from_a(a, b)
    if np.any(pd == 0.0):
        raise UndefinedLGDError("P_D(x_m) underflowed to 0; recovery undefined there")
    return _out(np.exp(-a) * norm_cdf_array((a - 0.5 * b * b) / b) / pd)


def loss_given_xm_total(x_m, contract: ContractSpec, b):
    """Like :func:`expected_loss_given_xm` but total on x_m <= -1 (loss 1 there)."""
    x = np.asarray(x_m, dtype=float)
    safe = np.where(x > -1.0, x, 0.0)
    a = math.log(contract.face_value / contract.initial_value) - np.log1p(safe)
    return _out(np.where(x > -1.0, _loss_from_a(a, _bval(b)), 1.0))


def _check_pd(p):
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0) & (p < 1))):
        raise DomainError("default probability must lie in (0, 1)")
    return p


def a_from_pd(p_d, b):
    """A = B Phi^{-1}(P_D) - B^2 / 2 (inverse of the P_D(A) relation)."""
    b = _bval(b)
    p = _check_pd(p_d)
    return _out(b * norm_ppf_array(p) - 0.5 * b * b)


def _structural_tail(p, b):
    # exp(-B q + B^2/2) Phi(q - B), q = Phi^{-1}(p), p clamped away from 0 and 1
    q = norm_ppf_array(np.clip(p, PD_CLAMP, 1.0 - PD_CLAMP))
    return np.exp(-b * q + 0.5 * b * b) * norm_cdf_array(q - b)


def structural_recovery(p_d, b):
    """Expected recovery as a function of default probability; B = 0 gives 1."""
    p = _check_pd(p_d)
    b = float(b)
    if b < 0:
        raise ParameterError("B must be >= 0")
    if b == 0.0:
        return _out(np.ones_like(p))
    return _out(_structural_tail(p, b) / p)


def structural_loss(p_d, b):
    """Portfolio loss as a function of default probability: P_D (1 - R(P_D))."""
    p = _check_pd(p_d)
    b = float(b)
    if b < 0:
        raise ParameterError("B must be >= 0")
    if b == 0.0:
        return _out(np.zeros_like(p))
    return _out(p - _structural_tail(p, b))


def structural_loss_total(p_d, b):
    """:func:`structural_loss` extended to the closed interval, L(0)=0, L(1)=1."""
    p = np.asarray(p_d, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise DomainError("default probability must lie in [0, 1]")
    inner = (p > 0) & (p < 1)
    out = np.where(p >= 1.0, 1.0, 0.0)
    if np.any(inner):
        out = out.astype(float)
        out[inner] = np.asarray(structural_loss(p[inner], b))
    return _out(out)


# --- density transforms -----------------------------------------------------

@dataclass(frozen=True)
class TabulatedDensity:
    """Density tabulated at ``x``; ``atoms`` lists point masses as (location, mass)."""

    x: np.ndarray
    density: np.ndarray
    atoms: tuple = ()

    def integral(self) -> float:
        """Trapezoid integral of the continuous part plus all atom masses."""
        cont = float(np.trapezoid(self.density, self.x)) if len(self.x) > 1 else 0.0
        return cont + sum(m for _, m in self.atoms)

    def mean(self) -> float:
        cont = float(np.trapezoid(self.x * self.density, self.x)) if len(self.x) > 1 else 0.0
        return cont + sum(v * m for v, m in self.atoms)


def fd_step(x):
    """Central-difference step used for L'(x_m)."""
    return np.maximum(1e-6, 1e-4 * (1.0 + np.abs(x)))


def _invert_loss_z(law, contract, b, targets, z_lo=-40.0, z_hi=40.0, iters=200):
    """z with L(x(z)) = target; L is decreasing in z.  Vectorised bisection."""
    lo = np.full(targets.shape, z_lo)
    hi = np.full(targets.shape, z_hi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        val = loss_given_xm_total(law.x_of(mid), contract, b)
        above = val > targets
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return 0.5 * (lo + hi)


def log_loss_grid(l_min=1e-16, l_max=None, n=2000, law=None, contract=None, b=None):
    """Log-spaced loss grid; ``l_max`` defaults to the loss at the 1e-12 market quantile."""
    if l_max is None:
        l_max = float(loss_given_xm_total(law.quantile(1e-12), contract, b))
    return np.geomspace(l_min, l_max, n)


def loss_pdf_from_market(law: MarketReturnLaw, contract: ContractSpec, b,
                         losses=None, x_grid=None) -> TabulatedDensity:
    """p_L(L) = p_X(x_m) / |L'(x_m)| on a log-spaced loss grid.

    Either pass ``losses`` (target loss values, inverted to x_m by bisection)
    or an explicit ``x_grid`` of market returns.  The default grid spans
    losses from 1e-16 to the loss at the 1e-12 market quantile.
    """
    b = _bval(b)
    if x_grid is None:
        if losses is None:
            losses = log_loss_grid(law=law, contract=contract, b=b)
        z = _invert_loss_z(law, contract, b, np.asarray(losses, dtype=float))
        x = law.x_of(z)
    else:
        x = np.asarray(x_grid, dtype=float)
        _check_xm(x)
    h = fd_step(x)
    # keep the stencil inside the support
    h = np.minimum(h, 0.5 * (1.0 + x))
    dl = (loss_given_xm_total(x + h, contract, b) - loss_given_xm_total(x - h, contract, b)) / (2 * h)
    if np.any(np.abs(dl) < 1e-300):
        raise GridError("L'(x_m) vanished on the grid; restrict or refine the grid")
    loss = np.asarray(loss_given_xm_total(x, contract, b))
    dens = np.asarray(law.pdf(x)) / np.abs(dl)
    order = np.argsort(loss)
    return TabulatedDensity(loss[order], dens[order])


def loss_pdf_from_pd(pd_samples, b, bins=None) -> TabulatedDensity:
    """p_L(L) = p_P(P_D) / |L'(P_D)| with the P_D density from a histogram.

    Zero default probabilities map to an atom at L = 0.  ``bins`` are P_D
    bin edges (default: 50 log-spaced bins over the positive samples).
    The continuous part is normalised to the fraction of positive samples.
    """
    p = np.asarray(pd_samples, dtype=float).ravel()
    if p.size == 0:
        raise ValueError("no default-probability samples")
    if np.any((p < 0) | (p > 1)):
        raise DomainError("default probabilities must lie in [0, 1]")
    b = _bval(b)
    n = p.size
    pos = p[p > 0]
    atoms = []
    if pos.size < n:
        atoms.append((0.0, (n - pos.size) / n))
    if pos.size == 0:
        return TabulatedDensity(np.empty(0), np.empty(0), tuple(atoms))
    if np.all(pos == pos[0]):
        atoms.append((float(structural_loss_total(pos[0], b)), pos.size / n))
        return TabulatedDensity(np.empty(0), np.empty(0), tuple(atoms))
    if bins is None:
        lo, hi = pos.min(), pos.max()
        bins = np.geomspace(lo, hi * (1 + 1e-12), 51)
    counts, edges = np.histogram(pos, bins=bins)
    widths = np.diff(edges)
    p_dens = counts / (n * widths)
    centres = 0.5 * (edges[:-1] + edges[1:])
    keep = counts > 0
    centres, p_dens, widths = centres[keep], p_dens[keep], widths[keep]
    h = np.minimum(np.maximum(1e-9, 1e-4 * centres), 0.5 * np.minimum(centres, 1 - centres))
    dl = (structural_loss_total(np.minimum(centres + h, 1.0), b)
          - structural_loss_total(np.maximum(centres - h, 0.0), b)) / (2 * h)
    if np.any(np.abs(dl) < 1e-300):
        raise GridError("L'(P_D) vanished; use narrower P_D bins")
    loss = np.asarray(structural_loss_total(centres, b))
    return TabulatedDensity(loss, p_dens / np.abs(dl), tuple(atoms))


def loss_cdf_from_market(law: MarketReturnLaw, contract: ContractSpec, b, losses):
    """P(L <= l) for the infinitely granular portfolio, via the market return law.

    L is decreasing in x_m, so P(L <= l) = 1 - F_X(x(l)).  Differences of
    this function give exact bin masses for histogram comparisons.
    """
    b = _bval(b)
    l = np.asarray(losses, dtype=float)
    z = _invert_loss_z(law, contract, b, np.clip(l, 0.0, 1.0))
    out = norm_cdf_array(-z)
    out = np.where(l <= 0.0, 0.0, np.where(l >= 1.0, 1.0, out))
    return _out(out)
