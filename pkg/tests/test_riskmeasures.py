import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mertonrr import analytics as an
from mertonrr import riskmeasures as rm
from mertonrr.model import ContractSpec, DiffusionParams
from mertonrr.numerics import DomainError

C = ContractSpec()
LAW = an.MarketReturnLaw.from_params(DiffusionParams(), C)
B = an.compound_b(0.5, 0.15, 1.0)


def test_quantile_convention_pin():
    s = np.random.default_rng(0).permutation(np.arange(1, 1001, dtype=float))
    # rank ceil(0.99 * 1000) = 990 in 1-based order
    assert rm.empirical_quantile(s, 0.99) == 990.0
    assert rm.empirical_quantile(np.arange(1.0, 11.0), 0.95) == 10.0
    assert rm.empirical_quantile(np.arange(1.0, 11.0), 0.5) == 5.0


def test_constant_samples():
    r = rm.risk_empirical(0.01, np.full(500, 0.02))
    assert r.var == r.etl == r.expected_loss == 0.02


def test_insufficient_samples():
    with pytest.raises(rm.InsufficientSamplesError):
        rm.risk_empirical(0.01, np.ones(99))
    rm.risk_empirical(0.01, np.ones(100))


def test_pd_route_constant():
    r = rm.risk_from_pd_samples(0.01, np.full(200, 0.1), 0.3)
    assert r.var == r.etl == pytest.approx(an.structural_loss(0.1, 0.3))
    assert r.method == "analytic-pd-empirical"


def test_pd_route_is_monotone_transform():
    pd = np.random.default_rng(1).beta(1, 40, size=5000)
    direct = rm.risk_empirical(0.01, an.structural_loss(pd, 0.2))
    via = rm.risk_from_pd_samples(0.01, pd, 0.2)
    assert (via.var, via.etl) == pytest.approx((direct.var, direct.etl), rel=1e-12)


def test_pd_route_handles_boundaries():
    pd = np.concatenate([np.zeros(90), np.full(10, 1.0)])
    r = rm.risk_from_pd_samples(0.05, pd, 0.2)
    assert r.var == 1.0 and r.expected_loss == pytest.approx(0.1)


def test_analytic_values_match_closed_form_oracle():
    # EL with c-independent oracle: single-firm continuous expected loss
    el = rm.el_analytic(LAW, C, B)
    s = 0.15
    a = math.log(0.75) - 0.05
    d = (a + s * s / 2) / s
    ref = 0.5 * math.erfc(-d / math.sqrt(2)) - math.exp(-a) * 0.5 * math.erfc(-(d - s) / math.sqrt(2))
    assert el == pytest.approx(ref, rel=1e-9)


def test_var_at_half_is_median_loss():
    assert rm.var_analytic(0.5, LAW, C, B) == pytest.approx(
        an.expected_loss_given_xm(LAW.quantile(0.5), C, B), rel=1e-14)


def test_var_monotone_in_alpha():
    alphas = [0.2, 0.1, 0.05, 0.01, 0.001]
    v = [rm.var_analytic(a, LAW, C, B) for a in alphas]
    assert all(x < y for x, y in zip(v, v[1:]))


@pytest.mark.parametrize("alpha", [0.5, 0.1, 0.01, 0.001])
def test_etl_dominates_var(alpha):
    assert rm.etl_analytic(alpha, LAW, C, B) >= rm.var_analytic(alpha, LAW, C, B)


def test_etl_tends_to_el():
    assert rm.etl_analytic(1 - 1e-9, LAW, C, B) == pytest.approx(rm.el_analytic(LAW, C, B), rel=1e-6)


def test_el_vanishes_without_noise():
    # B -> 0 through sigma -> 0; with the market law held fixed, market-wide
    # defaults would remain
    law = an.MarketReturnLaw(0.05, 1e-4, 0.5, 1.0)
    assert rm.el_analytic(law, C, an.compound_b(0.5, 1e-4, 1.0)) == 0.0


def test_alpha_domain():
    with pytest.raises(DomainError):
        rm.var_analytic(0.0, LAW, C, B)
    with pytest.raises(DomainError):
        rm.risk_empirical(1.0, np.ones(10))


def test_el_equals_tabulated_density_mean():
    dens = an.loss_pdf_from_market(LAW, C, B)
    assert dens.mean() == pytest.approx(rm.el_analytic(LAW, C, B), abs=1e-6)


@given(st.lists(st.floats(0, 1), min_size=20, max_size=300), st.sampled_from([0.05, 0.1, 0.25]))
def test_etl_ge_var_empirical(losses, alpha):
    r = rm.risk_empirical(alpha, losses)
    assert 0 <= r.var <= r.etl <= 1


def test_report_serialisation_roundtrip():
    r = rm.analytic_report(0.01, LAW, C, B)
    assert r.confidence == 0.99
    assert rm.RiskReport.from_text(r.to_text()) == r
    row = r.csv_row().strip().split(",")
    assert row[0] == "analytic-xm" and float(row[4]) == r.var
    assert list(rm.RiskReport.CSV_FIELDS) == list(r.as_dict())


def test_xm_route_matches_analytic_for_law_samples():
    z = np.random.default_rng(4).standard_normal(400_000)
    r = rm.risk_from_xm_samples(0.01, LAW.x_of(z), C, B)
    assert r.var == pytest.approx(rm.var_analytic(0.01, LAW, C, B), rel=0.03)
    assert r.expected_loss == pytest.approx(rm.el_analytic(LAW, C, B), rel=0.03)
