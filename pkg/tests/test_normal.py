"""Standard normal cdf/pdf/quantile against scipy and identities."""
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate as sint, special

from mertonrr.numerics import (DomainError, norm_cdf_array, norm_ppf_array, std_normal_cdf,
                               std_normal_pdf, std_normal_quantile)

finite_x = st.floats(-37.0, 37.0, allow_nan=False)


def test_cdf_at_zero():
    assert std_normal_cdf(0.0) == 0.5


def test_cdf_example_against_quadrature():
    # oracle: integral of the density over (-inf, x]
    x = -2.65925
    ref, _ = sint.quad(lambda t: math.exp(-0.5 * t * t) / math.sqrt(2 * math.pi), -np.inf, x,
                       epsabs=1e-14)
    assert std_normal_cdf(x) == pytest.approx(ref, abs=1e-12)
    assert std_normal_cdf(x) == pytest.approx(3.915e-3, rel=1e-3)


@pytest.mark.parametrize("x", np.linspace(-12, 12, 97))
def test_cdf_matches_scipy(x):
    assert abs(std_normal_cdf(x) - special.ndtr(x)) <= 1e-12


@given(finite_x)
def test_cdf_symmetry(x):
    assert abs(std_normal_cdf(x) + std_normal_cdf(-x) - 1.0) <= 1e-12


@given(finite_x, finite_x)
def test_cdf_monotone(a, b):
    lo, hi = min(a, b), max(a, b)
    assert std_normal_cdf(lo) <= std_normal_cdf(hi)


@given(st.floats(-8.0, 8.0))
def test_cdf_in_open_unit_interval(x):
    assert 0.0 < std_normal_cdf(x) < 1.0


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_cdf_rejects_nonfinite(bad):
    with pytest.raises(DomainError):
        std_normal_cdf(bad)


def test_pdf_value():
    assert std_normal_pdf(0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)


def test_quantile_median():
    assert std_normal_quantile(0.5) == 0.0


def test_quantile_example_against_bisection():
    lo, hi = 0.0, 5.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if std_normal_cdf(mid) < 0.99:
            lo = mid
        else:
            hi = mid
    assert std_normal_quantile(0.99) == pytest.approx(lo, abs=1e-12)
    assert std_normal_quantile(0.99) == pytest.approx(2.32635, abs=1e-5)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, math.nan])
def test_quantile_rejects_outside_unit_interval(p):
    with pytest.raises(DomainError):
        std_normal_quantile(p)


@given(st.floats(1e-10, 1 - 1e-10))
def test_quantile_inverts_cdf(p):
    assert abs(std_normal_cdf(std_normal_quantile(p)) - p) <= 1e-12


@given(st.floats(-6.0, 5.5))
def test_roundtrip_x(x):
    assert abs(std_normal_quantile(std_normal_cdf(x)) - x) <= 1e-9


@given(st.floats(5.5, 6.0))
def test_roundtrip_x_upper_tail_conditioning(x):
    # Phi(x) is within a few ulps of 1 here; the roundtrip error is bounded by
    # the spacing of doubles near 1 divided by the density
    p = std_normal_cdf(x)
    bound = 2 * np.spacing(1.0) / std_normal_pdf(x)
    assert abs(std_normal_quantile(p) - x) <= max(1e-9, bound)


@given(st.floats(1e-12, 1 - 1e-12), st.floats(1e-12, 1 - 1e-12))
def test_quantile_increasing(a, b):
    if a < b:
        assert std_normal_quantile(a) < std_normal_quantile(b)


def test_array_versions_agree_with_scalars():
    x = np.linspace(-8, 8, 101)
    assert np.array_equal(norm_cdf_array(x), [std_normal_cdf(v) for v in x])
    p = special.ndtr(x[5:-5])
    assert np.allclose(norm_ppf_array(p), special.ndtri(p), rtol=0, atol=1e-9)
    assert norm_ppf_array(np.array([0.0, 1.0])).tolist() == [-np.inf, np.inf]
