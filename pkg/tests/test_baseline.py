import math

import numpy as np
import pytest

from nrv2x.baseline import BaselineParams, baseline_collision, baseline_latency
from nrv2x.errors import DivergentLiteral, InvalidParams


def bp(**kw):
    base = dict(n=100, p_rk=0.4, rc_mean=10, csr_t=160, rri=20, t1=2)
    return BaselineParams(**{**base, **kw})


def test_single_vehicle_never_collides():
    assert baseline_collision(bp(n=1)) == 0.0


def test_always_keep_never_collides():
    assert baseline_collision(bp(p_rk=1.0)) == 0.0


def test_desk_example_against_binomial_sum():
    h = 0.6 / 1600
    # at least one of 99 independent neighbours reselects onto the tagged resource
    hit = sum(math.comb(99, j) * h**j * (1 - h) ** (99 - j) for j in range(1, 100))
    assert baseline_collision(bp()) == pytest.approx(hit / 1.4, rel=1e-12)
    assert baseline_collision(bp()) == pytest.approx((1 - (1 - 0.6 / 1600) ** 99) / 1.4, rel=1e-14)


def test_collision_monotone_in_n_and_pool():
    ns = [2, 10, 50, 100, 150]
    vals = [baseline_collision(bp(n=n)) for n in ns]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    pools = [40, 80, 160, 320]
    vals = [baseline_collision(bp(csr_t=c)) for c in pools]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_geometric_latency_examples():
    assert baseline_latency(bp(), 0.0) == (3 * 20 - 2) / 2
    lat = baseline_latency(bp(), 0.1)
    assert lat == pytest.approx(29 + 20 * 0.1 / 0.9)
    j = np.arange(1, 10**6 + 1)
    partial = 29 + np.sum(j * 20 * 0.1**j * 0.9)
    assert lat == pytest.approx(partial, rel=1e-12)
    assert lat == pytest.approx(31.22, abs=0.01)


def test_literal_latency_example():
    lat = baseline_latency(bp(), 0.1, "literal")
    assert lat == pytest.approx(209.0)
    q = 0.9
    assert lat - 29 == pytest.approx(20 * 0.1 * q / (1 - q) ** 2)


def test_literal_latency_diverges_at_zero():
    with pytest.raises(DivergentLiteral):
        baseline_latency(bp(), 0.0, "literal")


def test_geometric_latency_monotone_and_continuous():
    ps = np.linspace(0, 0.9, 19)
    vals = [baseline_latency(bp(), p) for p in ps]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert baseline_latency(bp(), 1e-12) == pytest.approx(baseline_latency(bp(), 0.0))


def test_modes_differ_inside():
    for p in (0.05, 0.2, 0.7):
        assert baseline_latency(bp(), p) != pytest.approx(baseline_latency(bp(), p, "literal"))


def test_invalid_inputs():
    with pytest.raises(InvalidParams):
        bp(n=0)
    with pytest.raises(InvalidParams):
        bp(rc_mean=0)
    with pytest.raises(InvalidParams):
        baseline_latency(bp(), 1.0)
    with pytest.raises(InvalidParams):
        baseline_collision(bp(csr_t=1, rc_mean=0.5))
    with pytest.raises(ValueError):
        baseline_latency(bp(), 0.1, "other")
