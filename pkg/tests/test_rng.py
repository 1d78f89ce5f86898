"""Philox streams: known-answer vectors, determinism and distribution checks."""
import math

import numpy as np
import pytest
from scipy import stats

from mertonrr.numerics import RngStream, draw_poisson, draw_standard_normal, draw_uniform
from mertonrr.numerics.rng import philox4x32


def test_philox_known_answers():
    # Random123 reference vectors
    u = np.uint32
    assert [int(v) for v in philox4x32(u(0), u(0), u(0), u(0), u(0), u(0))] == \
        [0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8]
    out = philox4x32(u(0x243F6A88), u(0x85A308D3), u(0x13198A2E), u(0x03707344),
                     u(0xA4093822), u(0x299F31D0))
    assert [int(v) for v in out] == [0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1]


def test_replay_identical():
    a = RngStream(42, 3, 7).normals(1000)
    b = RngStream(42, 3, 7).normals(1000)
    assert np.array_equal(a, b)


def test_counter_advances_consistently():
    s = RngStream(5, 1, 2)
    first = s.normals(7)
    rest = s.normals(13)
    assert np.array_equal(np.concatenate([first, rest]), RngStream(5, 1, 2).normals(20))


def test_single_draws_match_bulk():
    s = RngStream(9)
    singles = [draw_standard_normal(s) for _ in range(50)]
    assert np.array_equal(singles, RngStream(9).normals(50))
    u = RngStream(9, lane=1)
    assert np.array_equal([draw_uniform(u) for _ in range(5)], RngStream(9, lane=1).uniforms(5))


def test_copy_replays():
    s = RngStream(1)
    s.normals(3)
    c = s.copy()
    assert np.array_equal(s.normals(10), c.normals(10))


def test_normal_mean_clt():
    x = RngStream(2024).normals(10**6)
    assert abs(x.mean()) < 3e-3


def test_normal_ks_and_moments():
    x = RngStream(77, 4, 4).normals(200_000)
    assert stats.kstest(x, "norm").pvalue > 1e-3
    assert x.var() == pytest.approx(1.0, abs=0.01)
    assert np.mean(x**4) == pytest.approx(3.0, abs=0.06)


def test_ziggurat_tail_reached():
    x = RngStream(3).normals(2_000_000)
    frac = np.mean(np.abs(x) > 3.6541528853610088)
    assert frac == pytest.approx(2 * stats.norm.sf(3.6541528853610088), rel=0.1)


def test_uniform_open_interval():
    u = RngStream(8).uniforms(100_000)
    assert u.min() > 0 and u.max() < 1
    assert stats.kstest(u, "uniform").pvalue > 1e-3


def test_poisson_rare_events():
    n = 10**6
    mean = 2e-5
    k = RngStream(11).poissons(mean, n)
    frac = np.mean(k > 0)
    assert abs(frac - mean) <= 3 * math.sqrt(mean / n)


@pytest.mark.parametrize("mean", [0.5, 4.0, 75.0])
def test_poisson_moments(mean):
    k = RngStream(12).poissons(mean, 200_000)
    assert k.mean() == pytest.approx(mean, abs=5 * math.sqrt(mean / 200_000))
    assert k.var() == pytest.approx(mean, rel=0.03)


def test_poisson_zero_mean():
    s = RngStream(1)
    assert draw_poisson(s, 0.0) == 0
    with pytest.raises(ValueError):
        s.poissons(-1.0, 1)


@pytest.mark.parametrize("other", [(1, 0), (0, 1), (0, 0, 1)])
def test_disjoint_substreams_uncorrelated(other):
    n = 10**5
    a = RngStream(123, 0, 0).normals(n)
    b = RngStream(123, *other).normals(n)
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / math.sqrt(n)


def test_seeds_differ():
    assert not np.array_equal(RngStream(1).normals(10), RngStream(2).normals(10))


def test_validation():
    with pytest.raises(ValueError):
        RngStream(-1)
    with pytest.raises(ValueError):
        RngStream(2**64)
    with pytest.raises(ValueError):
        RngStream(0, stream_index=2**32)
