import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nrv2x.dtmc import closed_classes, steady_state
from nrv2x.errors import InvalidParams, InvalidWindow, OutOfRange
from nrv2x.scheduler import (
    PRINTED_SOURCES,
    PoolGeometry,
    SchedulerParams,
    check_against_matrix,
    estimate_p_csr,
    estimate_p_re,
    rc_bounds,
    scheduler_closed_form,
    scheduler_matrix,
)

SMALL = dict(t1=1, t2=6, t3=2, r_l=1, r_u=2, p_rc=0.4, p_qe=0.3, p_arr=0.2, p_csr=0.8, p_re=0.2, rri=6)


def small(**kw):
    return SchedulerParams(**{**SMALL, **kw})


@st.composite
def instances(draw):
    t1 = draw(st.integers(0, 3))
    w = draw(st.integers(2, 12))
    r_l = draw(st.integers(1, 4))
    return SchedulerParams(
        t1=t1,
        t2=t1 + w,
        t3=draw(st.integers(1, 6)),
        r_l=r_l,
        r_u=draw(st.integers(r_l, 5)),
        p_rc=draw(st.floats(0, 1)),
        p_qe=draw(st.floats(0, 0.95)),
        p_arr=draw(st.floats(0, 1)),
        p_csr=draw(st.floats(0.05, 1)),
        p_re=draw(st.floats(0, 1)),
        rri=draw(st.integers(1, 12)),
    )


def test_small_instance_matches_matrix():
    assert check_against_matrix(small()) == []


@settings(max_examples=60, deadline=None)
@given(instances())
def test_closed_form_matches_matrix(p):
    assert check_against_matrix(p) == []
    ss = scheduler_closed_form(p)
    assert ss.total == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(instances())
def test_printed_form_deviations_are_tagged(p):
    recs = check_against_matrix(p, "printed")
    active = p.printed_sources()
    if not active:
        assert recs == []
    for r in recs:
        assert r.source and set(r.source.split("+")) <= set(PRINTED_SOURCES)
    assert len(scheduler_closed_form(p, "printed").discrepancies) <= len(recs) + 1


def test_printed_form_matches_when_coefficients_coincide():
    p = small(p_qe=0.5, p_rc=0.5, r_l=2, r_u=2)
    assert p.printed_sources() == []
    assert check_against_matrix(p, "printed") == []


def test_no_reevaluation_gives_uniform_entry_cascade():
    p = small(t2=9, p_re=0.0)
    ss = scheduler_closed_form(p)
    W = p.window
    steps = np.diff(ss.phi_w[::-1])  # each lower position adds the same entry mass
    np.testing.assert_allclose(steps, steps[0], rtol=1e-12)
    # with no re-evaluation the virtual state only carries the uniform entry flow
    assert ss.virtual_flow == pytest.approx(steps[0] * W, rel=1e-12)


def test_table_one_high_intensity_instance():
    p = SchedulerParams(2, 20, 5, 25, 75, 0.4, 0.33, 0.05, 1.0, 1e-4, rri=20)
    ss = scheduler_closed_form(p)
    assert ss.total == pytest.approx(1.0, abs=1e-9)
    assert 0.0 < ss.p_s <= 1.0
    assert ss.p_s == pytest.approx(ss.phi_sched[:, 0].sum())


def test_matrix_single_rc_level():
    p = small(r_l=1, r_u=1, p_rc=0.0)
    m = scheduler_matrix(p)
    assert {s[1] for s in m.states if s[0] == "s"} == {1}


def test_small_matrix_is_irreducible_and_stochastic():
    m = scheduler_matrix(small())
    (cls,) = closed_classes(m)
    assert len(cls) == m.size
    np.testing.assert_allclose(np.asarray(m.rows.sum(axis=1)).ravel(), 1.0, atol=1e-12)


def test_idle_unreachable_with_full_queue_and_free_pool():
    p = small(p_qe=0.0, p_csr=1.0, p_re=0.0)
    assert steady_state(scheduler_matrix(p))["idle"] == 0.0
    assert scheduler_closed_form(p).phi_idle == 0.0


def test_window_and_params_validation():
    with pytest.raises(InvalidWindow):
        small(t2=2)
    with pytest.raises(InvalidParams):
        small(r_l=3, r_u=2)
    with pytest.raises(InvalidParams):
        small(p_re=1.5)
    with pytest.raises(InvalidParams):
        scheduler_closed_form(small(p_csr=0.0))


def test_p_s_increases_with_p_csr():
    for p_rc in (0.0, 0.4, 0.9):
        vals = [scheduler_closed_form(small(p_rc=p_rc, p_csr=c)).p_s for c in np.linspace(0.1, 1, 10)]
        assert all(b > a for a, b in zip(vals, vals[1:]))


@settings(max_examples=40, deadline=None)
@given(instances())
def test_window_flow_balance(p):
    ss = scheduler_closed_form(p)
    a = (p.p_qne + p.p_arr - p.p_qne * p.p_arr) * p.p_csr
    exit_10 = p.p_qne * (p.p_rc + (1 - p.p_rc) * p.p_csr)
    inflow = a * ss.phi_idle + exit_10 * ss.phi_10
    # every window visit ends with exactly one pass through (w, 0)
    assert ss.phi_w[0] == pytest.approx(inflow, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(instances())
def test_idle_formula_consistency(p):
    oracle = steady_state(scheduler_matrix(p))
    phi_w0 = oracle[("w", 0)]
    idle = (1 - p.p_rc) * (1 / p.p_csr - 1) / (p.p_arr + p.p_qne * (1 - p.p_arr)) * phi_w0
    assert idle == pytest.approx(oracle["idle"], abs=1e-8)


@pytest.mark.parametrize("t2,r_l,r_u,rri,p_qe,p_arr,p_csr", [
    (6, 1, 2, 6, 0.3, 0.2, 0.8),
    (9, 2, 4, 5, 0.0, 0.5, 0.5),
    (12, 1, 1, 3, 0.6, 0.1, 1.0),
])
def test_renewal_oracle_without_keep_or_reevaluation(t2, r_l, r_u, rri, p_qe, p_arr, p_csr):
    p = SchedulerParams(1, t2, 2, r_l, r_u, 0.0, p_qe, p_arr, p_csr, 0.0, rri=rri)
    W, q = p.window, 1 - p_qe
    # one cycle: window (uniform entry), RC countdown, optional idle spell
    rc_mean = (r_l + r_u) / 2
    window = (W + 1) / 2
    sched = rri * rc_mean / q
    idle = (1 - p_csr) / ((q + p_arr - q * p_arr) * p_csr)
    expected = (rc_mean / q) / (window + sched + idle)
    assert scheduler_closed_form(p).p_s == pytest.approx(expected, abs=1e-9)


def test_p_re_examples():
    assert estimate_p_re(PoolGeometry(n=1, window_slots=18), 0.01, 0.4) == 0.0
    assert estimate_p_re(PoolGeometry(n=100, window_slots=18), 0.01, 1.0) == 0.0
    geom = PoolGeometry(n=100, window_slots=10, csr_per_slot=16)
    assert geom.csr_t == 160
    assert estimate_p_re(geom, 0.01, 0.4) == pytest.approx(1 - (1 - 0.01 * 0.6 / 160) ** 99, rel=1e-14)


def test_p_csr_examples():
    geom = PoolGeometry(n=100, window_slots=10, csr_per_slot=16)
    assert estimate_p_csr(PoolGeometry(n=1, window_slots=10), 0.7) == 1.0
    assert estimate_p_csr(geom, 1.0) == 1e-6
    assert estimate_p_csr(PoolGeometry(n=10, window_slots=10, csr_per_slot=16), 0.9) == 1.0
    busy = PoolGeometry(n=150, window_slots=10, csr_per_slot=16)
    occ = 0.7
    need = math.ceil(0.2 * 160)
    brute = sum(math.comb(160, j) * (1 - occ) ** j * occ ** (160 - j) for j in range(need, 161))
    assert estimate_p_csr(busy, occ) == pytest.approx(brute, rel=1e-10)
    assert 0 < estimate_p_csr(geom, 0.99) <= 1


def test_pool_geometry_validation():
    with pytest.raises(InvalidParams):
        PoolGeometry(n=0, window_slots=10)


@pytest.mark.parametrize("rri,expected", [(100, (5, 15)), (50, (10, 30)), (10, (25, 75)), (20, (25, 75)), (1000, (5, 15))])
def test_rc_bounds(rri, expected):
    assert rc_bounds(rri) == expected


def test_rc_bounds_range():
    for bad in (0, 1001):
        with pytest.raises(OutOfRange):
            rc_bounds(bad)
