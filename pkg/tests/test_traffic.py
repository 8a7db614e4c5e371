import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nrv2x.dtmc import closed_classes, compare, steady_state
from nrv2x.errors import DegenerateP_S, InvalidParams
from nrv2x.traffic import (
    CamParams,
    DenmParams,
    cam_closed_form,
    cam_matrix,
    denm_closed_form,
    denm_matrix,
    idle_exit_probability,
    queue_inputs,
)


def test_cam_certain_success_has_no_waiting_mass():
    ss = cam_closed_form(CamParams(3, 1.0))
    assert np.all(ss.phi_txp == 0.0)
    assert ss.total == pytest.approx(1.0)


def test_cam_small_instance_matches_matrix():
    p = CamParams(4, 0.7)
    ss = cam_closed_form(p)
    assert compare(ss.as_dict(), steady_state(cam_matrix(p)), 1e-9) == []
    # the printed normalizer leaves a defect that is reported, not hidden
    assert [r.source for r in ss.discrepancies] == ["cam-normalizer"]
    assert ss.normalization_defect != 0.0


def test_cam_table_one_period_normalizes():
    ss = cam_closed_form(CamParams(60, 0.05))
    assert ss.total == pytest.approx(1.0, abs=1e-9)
    assert np.all(ss.phi_tx >= 0) and np.all(ss.phi_txp >= 0)


def test_cam_zero_success_rejected():
    with pytest.raises(DegenerateP_S):
        cam_closed_form(CamParams(4, 0.0))


def test_cam_params_validated():
    with pytest.raises(InvalidParams):
        CamParams(1, 0.5)
    with pytest.raises(InvalidParams):
        CamParams(4, 1.5)


def test_cam_matrix_waiting_branch_unreachable_at_certain_success():
    m = cam_matrix(CamParams(2, 1.0))
    (cls,) = closed_classes(m)
    assert {m.states[i] for i in cls} == {("tx", 0), ("tx", 1)}
    pi = steady_state(m)
    assert pi[("txp", 0)] == 0.0 and pi[("txp", 1)] == 0.0


def test_cam_matrix_small_is_irreducible():
    m = cam_matrix(CamParams(4, 0.7))
    assert m.size == 8
    (cls,) = closed_classes(m)
    assert len(cls) == 8


def test_cam_matrix_low_intensity_size():
    m = cam_matrix(CamParams(200, 0.5))
    assert m.size == 400
    np.testing.assert_allclose(np.asarray(m.rows.sum(axis=1)).ravel(), 1.0, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 40), st.floats(0.02, 1.0))
def test_cam_closed_form_always_matches_matrix(t_c, p_s):
    p = CamParams(t_c, p_s)
    ss = cam_closed_form(p)
    assert compare(ss.as_dict(), steady_state(cam_matrix(p)), 1e-9) == []
    assert abs(ss.total - 1.0) < 1e-9


def test_denm_single_copy_has_no_repetition_mass():
    ss = denm_closed_form(DenmParams(5, 10, 1, 0.6))
    assert np.all(ss.phi_tx[1:] == 0.0)
    assert np.all(ss.phi_txp == 0.0)
    assert ss.total == pytest.approx(1.0)


def test_denm_high_intensity_matches_matrix():
    p = DenmParams(20, 40, 3, 0.6)
    oracle = steady_state(denm_matrix(p))
    assert compare(denm_closed_form(p).as_dict(), oracle, 1e-9) == []


def test_denm_low_intensity_normalizes():
    ss = denm_closed_form(DenmParams(100, 200, 3, 0.3))
    assert ss.total == pytest.approx(1.0, abs=1e-9)


def test_denm_printed_idle_form_is_available():
    p = DenmParams(20, 40, 3, 0.6)
    chain, printed = denm_closed_form(p), denm_closed_form(p, idle_form="printed")
    assert printed.total == pytest.approx(1.0)
    assert printed.phi_idle != pytest.approx(chain.phi_idle)


def test_denm_matrix_dimension_high_intensity():
    assert denm_matrix(DenmParams(20, 40, 3, 0.5)).size == 20 + 2 * 40 + 1


def test_denm_matrix_small_is_irreducible():
    m = denm_matrix(DenmParams(2, 4, 3, 0.5))
    (cls,) = closed_classes(m)
    assert len(cls) == m.size


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(0, 12), st.integers(1, 4), st.floats(0.05, 1.0))
def test_denm_closed_form_always_matches_matrix(t_avg, extra, k, p_s):
    p = DenmParams(t_avg, max(2, t_avg + extra), k, p_s)
    oracle = steady_state(denm_matrix(p))
    assert compare(denm_closed_form(p).as_dict(), oracle, 1e-9) == []


def test_idle_exit_readings():
    assert idle_exit_probability(10, 10) == 1.0
    assert idle_exit_probability(20, 40) == pytest.approx(1 - math.exp(-1 / 30))
    assert idle_exit_probability(20, 40, "mean_gap") == pytest.approx(1 - math.exp(-1 / 20))
    with pytest.raises(ValueError):
        idle_exit_probability(20, 40, "other")


def test_denm_params_validated():
    with pytest.raises(InvalidParams):
        DenmParams(10, 5, 3, 0.5)
    with pytest.raises(InvalidParams):
        DenmParams(2, 4, 0, 0.5)


@pytest.mark.parametrize("make", [lambda p: cam_closed_form(CamParams(20, p)),
                                  lambda p: denm_closed_form(DenmParams(10, 20, 3, p))])
def test_waiting_mass_non_increasing_in_success(make):
    masses = [make(p).waiting_mass for p in np.arange(1, 10) / 10]
    assert all(b <= a + 1e-15 for a, b in zip(masses, masses[1:]))


def test_queue_never_grows_at_certain_success():
    q = queue_inputs(cam_closed_form(CamParams(6, 1.0)), None, 1.0)
    assert q.alpha == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 60), st.floats(0.01, 0.99))
def test_fresh_failure_path_adds_to_start_probability(t_c, p_s):
    q = queue_inputs(cam_closed_form(CamParams(t_c, p_s)), None, p_s)
    assert q.alpha0 >= q.alpha


def test_high_intensity_inputs_are_probabilities():
    p_s = 0.05
    q = queue_inputs(cam_closed_form(CamParams(60, p_s)), denm_closed_form(DenmParams(20, 40, 3, p_s)), p_s)
    for v in (q.alpha0, q.alpha, q.beta, q.p_arr):
        assert 0.0 <= v <= 1.0


def _batch_sigma(x, batches=50):
    means = x[: x.size // batches * batches].reshape(batches, -1).mean(axis=1)
    return means.std(ddof=1) / np.sqrt(batches)


def test_queue_inputs_match_generator_monte_carlo():
    p = CamParams(4, 0.7)
    m = cam_matrix(p)
    ss = cam_closed_form(p)
    q = queue_inputs(ss, None, p.p_s)
    # walk the explicit chain and count the three queue events per slot
    rng = np.random.default_rng(2024)
    dense = m.dense()
    cdf = np.cumsum(dense, axis=1)
    steps = 400_000
    u = rng.random(steps)
    idx = m.index()
    tx0, txp0 = idx[("tx", 0)], idx[("txp", 0)]
    txp_top = idx[("txp", p.t_c - 1)]
    draining = np.array([s[0] == "txp" and s[1] >= 1 for s in m.states])
    s = tx0
    start = np.zeros(steps)
    grow = np.zeros(steps)
    drain = np.zeros(steps)
    for t in range(steps):
        nxt = int(np.searchsorted(cdf[s], u[t], side="right"))
        start[t] = (s == tx0 and nxt == txp_top) or s == txp0
        grow[t] = s == txp0
        drain[t] = draining[s] and m.states[nxt][0] == "tx"
        s = nxt
    for hits, expected in ((start, q.alpha0), (grow, q.alpha), (drain, q.beta)):
        assert abs(hits.mean() - expected) < 3 * _batch_sigma(hits) + 1e-12
