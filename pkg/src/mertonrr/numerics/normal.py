"""Standard normal CDF and quantile.

Scalar entry points validate their input and raise :class:`DomainError`;
the ``*_array`` variants are numba ufuncs used inside vectorised code and
do no checking.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)


class DomainError(ValueError):
    """Argument outside the mathematical domain of a function."""


# Acklam's rational approximation, relative error ~1.2e-9 before refinement.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


@nb.njit(cache=True)
def _cdf(x):
    return 0.5 * math.erfc(-x / SQRT2)


@nb.njit(cache=True)
def _pdf(x):
    return math.exp(-0.5 * x * x) / SQRT2PI


@nb.njit(cache=True)
def _acklam_lower(p):
    # valid for 0 < p <= 0.5
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    q = p - 0.5
    r = q * q
    return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
        (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)


@nb.njit(cache=True)
def _quantile(p):
    # 1 - p is exact for p > 0.5, so the upper tail keeps full accuracy
    sign = 1.0
    if p > 0.5:
        p = 1.0 - p
        sign = -1.0
    x = _acklam_lower(p)
    # one Newton step on Phi squares the approximation error
    fx = _pdf(x)
    if fx > 0.0:
        x -= (_cdf(x) - p) / fx
    return sign * x


@nb.vectorize(["float64(float64)"], cache=True)
def norm_cdf_array(x):
    return 0.5 * math.erfc(-x / SQRT2)


@nb.vectorize(["float64(float64)"], cache=True)
def norm_pdf_array(x):
    return math.exp(-0.5 * x * x) / SQRT2PI


@nb.vectorize(["float64(float64)"], cache=True)
def norm_ppf_array(p):
    if p <= 0.0:
        return -np.inf
    if p >= 1.0:
        return np.inf
    return _quantile(p)


def std_normal_cdf(x: float) -> float:
    """Phi(x), computed from ``math.erfc`` (absolute error well below 1e-15)."""
    if not math.isfinite(x):
        raise DomainError(f"std_normal_cdf needs a finite argument, got {x!r}")
    return 0.5 * math.erfc(-x / SQRT2)


def std_normal_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / SQRT2PI


def std_normal_quantile(p: float) -> float:
    """Inverse of :func:`std_normal_cdf` on the open interval (0, 1)."""
    if not (0.0 < p < 1.0):
        raise DomainError(f"std_normal_quantile needs 0 < p < 1, got {p!r}")
    return float(_quantile(p))
