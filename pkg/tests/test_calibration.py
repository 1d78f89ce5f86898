import io
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mertonrr import calibration as cal
from mertonrr.analytics import structural_loss, structural_recovery
from mertonrr.model import ParameterError

P = np.linspace(0.01, 0.5, 20)


def noiseless(b=0.3, kind="recovery"):
    f = structural_recovery if kind == "recovery" else structural_loss
    return cal.ObservationSet(P, f(P, b), kind)


def test_noiseless_recovery():
    fit = cal.fit_b(noiseless())
    assert fit.converged and not fit.at_boundary
    assert fit.b_hat == pytest.approx(0.3, abs=1e-6)
    assert fit.sse < 1e-15


def test_noisy_bootstrap():
    rng = np.random.default_rng(2024)
    errors = []
    for _ in range(100):
        v = np.clip(structural_recovery(P, 0.3) + rng.normal(0, 0.02, P.size), 0, 1)
        errors.append(cal.fit_b(cal.ObservationSet(P, v, "recovery")).b_hat - 0.3)
    assert np.max(np.abs(errors)) <= 0.05


def test_recovery_and_loss_fits_agree():
    a = cal.fit_b(noiseless(0.7, "recovery")).b_hat
    b = cal.fit_b(noiseless(0.7, "loss")).b_hat
    assert abs(a - b) <= 1e-6


def test_large_b_regime():
    assert cal.fit_b(noiseless(2.28)).b_hat == pytest.approx(2.28, abs=1e-6)


def test_mixed_kinds_and_weights():
    obs = cal.ObservationSet(np.r_[P, P], np.r_[structural_recovery(P, 0.4), structural_loss(P, 0.4)],
                             ("recovery",) * 20 + ("loss",) * 20, weight=np.arange(40.0))
    assert cal.fit_b(obs).b_hat == pytest.approx(0.4, abs=1e-6)


def test_residuals():
    obs = noiseless()
    assert np.allclose(cal.residuals(obs, 0.3), 0, atol=1e-15)
    # the model falls with B, so observed minus model turns positive
    assert np.all(cal.residuals(obs, 0.35) > 0)
    fit = cal.fit_b(obs)
    assert np.sum(cal.residuals(obs, fit.b_hat) ** 2) == pytest.approx(fit.sse, abs=1e-18)


def test_sse_audit_grid():
    rng = np.random.default_rng(7)
    v = np.clip(structural_recovery(P, 0.8) + rng.normal(0, 0.05, P.size), 0, 1)
    obs = cal.ObservationSet(P, v, "recovery")
    fit = cal.fit_b(obs)
    grid = np.geomspace(1e-3, 10, 100)
    assert all(fit.sse <= cal.sse(obs, b) + 1e-15 for b in grid)


@settings(max_examples=20)
@given(st.permutations(list(range(20))))
def test_permutation_invariance(perm):
    rng = np.random.default_rng(3)
    v = np.clip(structural_recovery(P, 0.3) + rng.normal(0, 0.02, P.size), 0, 1)
    base = cal.fit_b(cal.ObservationSet(P, v, "recovery")).b_hat
    perm = np.array(perm)
    # exact equality needs an order-independent objective; fsum provides it
    assert cal.fit_b(cal.ObservationSet(P[perm], v[perm], "recovery")).b_hat == base


def test_boundary_flag():
    obs = cal.ObservationSet(P, np.ones(P.size), "recovery")
    fit = cal.fit_b(obs)
    assert fit.at_boundary and fit.b_hat == pytest.approx(1e-3, abs=1e-7)


def test_nonconvergence_carries_best_iterate():
    with pytest.raises(cal.CalibrationError) as info:
        cal.fit_b(noiseless(), max_iter=3)
    assert 1e-3 <= info.value.best_b <= 10
    assert info.value.iterations > 0


def test_observation_validation():
    with pytest.raises(ParameterError):
        cal.ObservationSet([0.0], [0.5], "recovery")
    with pytest.raises(ParameterError):
        cal.ObservationSet([], [], "recovery")
    with pytest.raises(ParameterError):
        cal.ObservationSet([0.1], [1.5], "recovery")
    with pytest.raises(ParameterError):
        cal.ObservationSet([0.1], [0.5], "spread")
    with pytest.raises(ParameterError):
        cal.fit_b(noiseless(), b_lo=0.0)


CSV = """year,default_rate,recovery_rate
1990,0.02,0.45
1991,0.0,0.50
1992,0.03,0.40
"""


def test_csv_ingestion_skips_boundary_rows():
    with pytest.warns(cal.RejectedRowWarning, match="line 3"):
        obs, labels = cal.parse_observations(io.StringIO(CSV))
    assert labels == ["1990", "1992"]
    assert obs.kind == ("recovery", "recovery")
    assert obs.pd.tolist() == [0.02, 0.03]


def test_csv_malformed_row_line_number():
    bad = CSV.replace("1992,0.03,0.40", "1992,abc,0.40")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(cal.IngestionError) as info:
            cal.parse_observations(io.StringIO(bad))
    assert info.value.line == 4


def test_csv_loss_column_and_weights():
    text = "# comment\ndefault_rate,loss_rate,weight\n0.1,0.02,2\n0.2,0.05,1\n"
    obs, labels = cal.parse_observations(io.StringIO(text))
    assert obs.kind == ("loss", "loss") and obs.weights.tolist() == [2.0, 1.0]
    assert labels == ["3", "4"]


def test_csv_missing_columns():
    with pytest.raises(cal.IngestionError):
        cal.parse_observations(io.StringIO("year,recovery_rate\n1990,0.4\n"))
    with pytest.raises(cal.IngestionError):
        cal.parse_observations(io.StringIO("default_rate,recovery_rate\n0.1,0.4,9\n"))
