import numpy as np
import pytest
from scipy import stats

from nrv2x.config import preset_config
from nrv2x.coupled import solve
from nrv2x.errors import InvalidDuration, InvalidParams
from nrv2x.sim import EVENT_NAMES, p_re_agreement, run, run_batch
from nrv2x.traffic import idle_exit_probability


def test_single_vehicle_never_collides():
    rep = run(preset_config("high", n=1), 5, 50_000)
    assert rep.p_col_hat == 0.0 and rep.counts["data_tx"] > 0


def test_same_seed_is_bit_identical():
    cfg = preset_config("high", n=30)
    a, b = run(cfg, 99, 40_000), run(cfg, 99, 40_000)
    assert a.counts == b.counts
    assert a.latency_hist.tobytes() == b.latency_hist.tobytes()
    assert (a.p_col_hat, a.p_s_hat, a.latency_mean_slots) == (b.p_col_hat, b.p_s_hat, b.latency_mean_slots)
    assert run(cfg, 100, 40_000).counts != a.counts


@pytest.mark.parametrize("preset,n", [("high", 50), ("low", 150), ("high", 150)])
def test_message_conservation(preset, n):
    rep = run(preset_config(preset, n=n), 3, 60_000)
    c = rep.counts
    assert c["generated"] == c["sent"] + c["dropped"] + c["pending"]
    assert rep.conservation_ok()


def test_overflow_drops_are_counted():
    # 100 ms reservations cannot keep up with the high-intensity message rate
    rep = run(preset_config("high", n=5, rri_ms=100.0, queue_capacity=2), 1, 50_000)
    assert rep.counts["dropped"] > 0 and rep.conservation_ok()


def test_duration_validated():
    cfg = preset_config("high", n=5)
    with pytest.raises(InvalidDuration):
        run(cfg, 1, 10 * cfg.rri - 1)


def test_cam_rate_matches_period():
    cfg = preset_config("high", n=20, traffic="cam")
    rep = run(cfg, 4, 120_000)
    trials = cfg.n_vehicles * rep.simulated_slots
    rate = rep.counts["cam"] / trials
    p = 1 / cfg.t_c
    assert abs(rate - p) < 3 * np.sqrt(p * (1 - p) / trials)
    assert rep.counts["denm"] == 0


def test_denm_gap_matches_configured_mean():
    cfg = preset_config("high", n=20)
    rep = run(cfg, 8, 200_000)
    p = idle_exit_probability(cfg.t_avg, cfg.t_d)
    mean = cfg.t_avg + 1 / p
    sigma = np.sqrt((1 - p) / p**2 / rep.counts["denm_gaps"])
    assert abs(rep.denm_gap_mean - mean) < 3 * sigma


def test_batch_rejects_duplicate_seeds():
    cfg = preset_config("high", n=5)
    with pytest.raises(InvalidParams):
        run_batch(cfg, [1, 1], 10_000)
    with pytest.raises(InvalidParams):
        run_batch(cfg, [1], 10_000)


def test_batch_single_vehicle_zero_variance():
    rep = run_batch(preset_config("high", n=1), range(10), 20_000)
    assert rep.p_col_hat == 0.0 and rep.p_col_ci == 0.0


def test_batch_interval_shrinks_with_seeds():
    cfg = preset_config("low", n=150, reevaluation=False)
    singles = np.array([run(cfg, 1000 + s, 20_000).p_col_hat for s in range(10)])
    batches = [run_batch(cfg, range(100 * b, 100 * b + 10), 20_000) for b in range(10)]
    pooled = np.array([b.p_col_hat for b in batches])
    ratio = pooled.std(ddof=1) / singles.std(ddof=1)
    assert 0.12 < ratio < 0.7  # about 1/sqrt(10)
    assert np.mean([b.p_col_ci for b in batches]) < 1.96 * singles.std(ddof=1)


@pytest.mark.parametrize("preset,n", [("high", 50), ("low", 150)])
def test_reevaluation_never_hurts(preset, n):
    on = run_batch(preset_config(preset, n=n), range(5), 100_000).per_seed("p_col_hat")
    off = run_batch(preset_config(preset, n=n, reevaluation=False), range(5), 100_000).per_seed("p_col_hat")
    res = stats.ttest_rel(off, on, alternative="greater")
    assert res.pvalue < 0.05


def test_p_re_trigger_rate_compared_with_estimate():
    cfg = preset_config("high", n=150)
    rep = run(cfg, 2, 200_000)
    ok, note = p_re_agreement(rep, solve(cfg).p_re)
    assert ok or note.startswith("model error")
    assert rep.counts["checks"] > 0


def test_trace_lines():
    cfg = preset_config("high", n=3)
    rep = run(cfg, 1, 2_000, trace_capacity=500)
    lines = rep.trace_lines()
    assert 0 < len(lines) <= 500
    for line in lines:
        slot, veh, event, res, ch = line.split("\t")
        assert event in EVENT_NAMES and 0 <= int(veh) < 3
    assert run(cfg, 1, 2_000).trace is None


def test_report_fields_in_range():
    rep = run(preset_config("high", n=50), 11, 50_000)
    for v in (rep.p_col_hat, rep.p_s_hat, rep.p_re_trigger_hat, rep.p_col_first_hat):
        assert 0.0 <= v <= 1.0
    assert rep.p_col_ci >= 0 and rep.latency_p95_slots >= 0
    assert rep.metadata["repeated_reevaluation"] is True
