from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from scipy import special

from mbsense.perf import (PowerConstraintSet, RocCurve, ThroughputModel,
                          avg_throughput, bandwidth_sweep, bod_boe,
                          check_constraints, edge_metrics, frame_throughput,
                          match_edges, mb_aggregate, optimize_tau,
                          optimize_tau_k, rates, roc_analytic,
                          roc_monte_carlo, waterfill, wilson_interval)
from mbsense.rng import substream
from mbsense.sbdetect import DetectorSpec, ThresholdPolicy, calibrate_threshold
from mbsense.scenario import H0, H1

SNR_15DB = 10**-1.5


def _model(**overrides):
    params = dict(bandwidth=6e6, power_idle=1.0, power_busy=0.4, noise_var=1.0,
                  interference=0.01, idle_prior=0.7, pfa=0.1, pd=0.9,
                  num_bands=10, accessed=10, frame_duration=0.1,
                  sensing_time=2e-3, sample_rate=1e4, access_mode="hybrid",
                  sense_snr=0.1)
    params.update(overrides)
    return ThroughputModel(**params)


# ---------------------------------------------------------------------------
# ROC
# ---------------------------------------------------------------------------

def test_roc_analytic_values():
    curve = roc_analytic("coherent", 500, SNR_15DB, [0.1])
    assert curve.pd[0] == pytest.approx(0.9965, abs=5e-4)
    curve = roc_analytic("energy", 500, SNR_15DB, [0.1])
    assert curve.pd[0] == pytest.approx(0.289, abs=1e-3)
    # always-alarm endpoint
    for detector in ("energy", "coherent"):
        curve = roc_analytic(detector, 500, SNR_15DB, [0.5, 0.999999])
        assert curve.pd[-1] >= 0.999
    with pytest.raises(ValueError):
        roc_analytic("cp", 500, 0.1, [0.1])
    with pytest.raises(ValueError):
        roc_analytic("energy", 500, 0.1, [0.0, 0.5])


def test_roc_monte_carlo_matches_analytic():
    # empirical curve vs the exact sampling law within +-0.01 per point;
    # the CLT closed form carries a documented skew error bounded by 0.015
    n, snr = 125, 0.1
    grid = [0.01, 0.05, 0.1, 0.2, 0.5]
    thresholds = [calibrate_threshold("energy", ThresholdPolicy("target-pfa", g),
                                      n, snr) for g in grid]
    curve = roc_monte_carlo(DetectorSpec("energy"), n, snr, 1.0, thresholds,
                            10**5, 91)
    analytic = roc_analytic("energy", n, snr, grid)
    for lam, pfa_mc, pd_mc, pd_clt in zip(sorted(thresholds, reverse=True),
                                          curve.pfa, curve.pd, analytic.pd):
        assert abs(pfa_mc - special.gammaincc(n, lam)) <= 0.01
        assert abs(pd_mc - special.gammaincc(n, lam / (1 + snr))) <= 0.01
        assert abs(pd_mc - pd_clt) <= 0.015


def test_roc_monte_carlo_zero_snr_is_diagonal():
    thresholds = np.linspace(100, 160, 7)
    curve = roc_monte_carlo(DetectorSpec("energy"), 125, 0.0, 1.0, thresholds,
                            20000, 92)
    np.testing.assert_allclose(curve.pd, curve.pfa, atol=0.01)


def test_roc_monte_carlo_single_trial():
    curve = roc_monte_carlo(DetectorSpec("energy"), 64, 0.1, 1.0, [60.0, 70.0],
                            1, 93)
    assert set(curve.pfa) <= {0.0, 1.0}
    assert set(curve.pd) <= {0.0, 1.0}
    with pytest.raises(ValueError):
        roc_monte_carlo(DetectorSpec("energy"), 64, 0.1, 1.0, [60.0], 0, 93)


def test_wilson_interval():
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi and 0 <= lo and hi <= 1
    lo, hi = wilson_interval(0, 100)
    assert lo == pytest.approx(0.0, abs=1e-12) and hi < 0.05


def test_roc_curve_validation():
    with pytest.raises(ValueError):
        RocCurve([0.2, 0.1], [0.5, 0.6], "analytic")
    with pytest.raises(ValueError):
        RocCurve([0.1, 0.2], [0.5, 1.2], "analytic")


# ---------------------------------------------------------------------------
# Aggregates
# ---------------------------------------------------------------------------

def test_aggregate_weighted_examples():
    assert mb_aggregate([0.9, 0.5], "weighted", weights=[0.5, 0.5]) == pytest.approx(0.7)
    assert mb_aggregate([0.9, 0.5], "weighted", weights=[1.0, 0.0]) == pytest.approx(0.9)
    with pytest.raises(ValueError):
        mb_aggregate([0.9, 0.5], "weighted", weights=[0.7, 0.5])


def test_aggregate_equal_weights_reduce_to_mean_exactly():
    values = [Fraction(9, 10), Fraction(1, 2), Fraction(3, 4), Fraction(1, 3)]
    weighted = mb_aggregate(values, "weighted", weights=[Fraction(1, 4)] * 4)
    assert weighted == mb_aggregate(values, "mean")


def test_aggregate_any_band():
    assert mb_aggregate([0.9, 0.9], "any-band") == pytest.approx(0.99)
    values = [Fraction(1, 2), Fraction(1, 3), Fraction(1, 5)]
    exact = mb_aggregate(values, "any-band")
    brute = 0
    for outcome in product([0, 1], repeat=3):
        if any(outcome):
            weight = 1
            for bit, p in zip(outcome, values):
                weight *= p if bit else (1 - p)
            brute += weight
    assert exact == brute


def test_aggregate_modified_fa():
    # perfect detectors never declare a vacant channel busy
    assert mb_aggregate([1.0] * 4, "modified-fa", priors=[0.3] * 4,
                        pfa_per_band=[0.0] * 4) == 0.0
    # enumeration agrees with the independent product closed form
    rng = substream(94)
    for _ in range(10):
        m = int(rng.integers(2, 8))
        p_idle = rng.uniform(0.2, 0.8, m)
        pfa = rng.uniform(0.05, 0.4, m)
        pd = rng.uniform(0.5, 0.99, m)
        got = mb_aggregate(pd, "modified-fa", priors=p_idle, pfa_per_band=pfa)
        busy = 1.0 - p_idle
        closed = ((np.prod(p_idle * pfa + busy * pd) - np.prod(busy * pd))
                  / (1.0 - np.prod(busy)))
        assert got == pytest.approx(closed, rel=1e-12)
    with pytest.raises(ValueError):
        mb_aggregate([0.5] * 21, "modified-fa", priors=[0.5] * 21,
                     pfa_per_band=[0.1] * 21)


def test_aggregate_modified_fa_monte_carlo_mode():
    p_idle, pfa, pd = [0.5, 0.6, 0.4], [0.2, 0.3, 0.1], [0.9, 0.8, 0.7]
    exact = mb_aggregate(pd, "modified-fa", priors=p_idle, pfa_per_band=pfa)
    mc = mb_aggregate(pd, "modified-fa", priors=p_idle, pfa_per_band=pfa,
                      method="monte-carlo", trials=200000, rng=substream(95))
    assert abs(mc - exact) <= 0.01


# ---------------------------------------------------------------------------
# Edge metrics and BOE
# ---------------------------------------------------------------------------

def test_edge_metrics_worked_example():
    m = edge_metrics(4, 3, 5, 1024)
    assert abs(m.p_miss - 0.25) <= 1e-12
    assert abs(m.p_false - 2.0 / 1020.0) <= 1e-12
    assert abs(m.p_error - 0.5 * (0.25 + 2.0 / 1020.0)) <= 1e-12


def test_edge_metrics_limits():
    perfect = edge_metrics(4, 4, 4, 1024)
    assert (perfect.p_miss, perfect.p_false, perfect.p_error) == (0.0, 0.0, 0.0)
    nothing = edge_metrics(4, 0, 0, 1024)
    assert (nothing.p_miss, nothing.p_false, nothing.p_error) == (1.0, 0.0, 0.5)
    with pytest.raises(ValueError):
        edge_metrics(4, 5, 5, 1024)
    with pytest.raises(ValueError):
        edge_metrics(4, 3, 2, 1024)


def test_match_edges_greedy_one_to_one():
    n_true, n_correct, n_detected = match_edges([100, 200], [101, 102, 300], tol=2)
    assert (n_true, n_correct, n_detected) == (2, 1, 3)
    n_true, n_correct, n_detected = match_edges([100, 103], [101, 102], tol=2)
    assert n_correct == 2  # one-to-one: 101->100, 102->103


def test_bod_boe():
    assert bod_boe([1, 0, 1], [4.0, 0.0, 1.0], [1, 0, 1]) == 0.0
    assert bod_boe([1, 1], [1.0, 1.0], [0, 0]) == 1.0
    # missing the snr-1 band among {4, idle, 1} costs 1/17 of the energy
    assert bod_boe([1, 0, 1], [4.0, 0.0, 1.0], [1, 0, 0]) == pytest.approx(1 / 17)
    assert bod_boe([1, 1], [4.0, 1.0], [1, 0], binary=True) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        bod_boe([0, 0], [1.0, 1.0], [1, 0])


# ---------------------------------------------------------------------------
# Throughput model
# ---------------------------------------------------------------------------

def test_rates_examples():
    model = _model(power_idle=1.0, power_busy=0.4, interference=0.01)
    r = rates(model)
    assert r.r00 == pytest.approx(6e6)
    assert r.r10 == pytest.approx(2.9126e6, abs=1e3)
    infinite = _model(interference=np.inf)
    r_inf = rates(infinite)
    assert r_inf.r01 == 0.0 and r_inf.r11 == 0.0 and r_inf.r00 == pytest.approx(6e6)


def test_avg_throughput_examples():
    perfect = _model(access_mode="interweave", pfa=0.0, pd=1.0, num_bands=1,
                     accessed=1)
    assert avg_throughput(perfect, 1) == pytest.approx(0.7 * 6e6)
    noisy = _model(access_mode="interweave", pfa=0.1, pd=1.0, num_bands=1,
                   accessed=1)
    assert avg_throughput(noisy, 1) == pytest.approx(0.7 * 0.9 * 6e6)


def test_avg_throughput_fig10_orderings():
    hybrid = _model(access_mode="hybrid")
    inter = _model(access_mode="interweave")
    r_hybrid = [avg_throughput(hybrid, l, split_power=True) for l in (1, 5, 10)]
    r_inter = [avg_throughput(inter, l, split_power=True) for l in (1, 5, 10)]
    assert np.all(np.diff(r_hybrid) > 0) and np.all(np.diff(r_inter) > 0)
    assert all(h > i for h, i in zip(r_hybrid, r_inter))
    tighter = _model(access_mode="interweave", pfa=0.05)
    looser = _model(access_mode="interweave", pfa=0.2)
    for l in (1, 5, 10):
        assert avg_throughput(tighter, l, split_power=True) > avg_throughput(
            looser, l, split_power=True)


def test_frame_throughput_scaling():
    # fixed probabilities: C is R scaled by the transmission fraction
    model = _model(sensing_time=0.05)  # tau = T/2
    r = avg_throughput(model)
    result = frame_throughput(model)
    assert result.c == pytest.approx(r / 2.0)
    late = frame_throughput(model, tau_grid=[0.1 * (1 - 1e-9)])
    assert late.c_curve[0] == pytest.approx(0.0, abs=r * 1e-8)
    with pytest.raises(ValueError):
        frame_throughput(model, tau_grid=[0.2])


def test_frame_throughput_tradeoff_unimodal():
    model = _model(policy=ThresholdPolicy("target-pd", 0.9))
    result = frame_throughput(model)
    peak = int(np.argmax(result.c_curve))
    assert 0 < peak < result.taus.size - 1  # interior maximizer
    assert np.all(np.diff(result.c_curve[:peak + 1]) > 0)
    assert np.all(np.diff(result.c_curve[peak:]) < 0)


def test_detection_probability_rises_with_sensing_time():
    from mbsense.perf import _sensing_probs
    model = _model(policy=ThresholdPolicy("target-pfa", 0.1))
    taus = model.frame_duration * np.arange(1, 201) / 201.0
    pd_curve = np.array([_sensing_probs(model, t)[1][0] for t in taus])
    assert np.all(np.diff(pd_curve) >= 0)


def test_optimize_tau_beats_grid_oracle():
    model = _model(policy=ThresholdPolicy("target-pd", 0.9))
    result = frame_throughput(model)
    opt = optimize_tau(model)
    assert opt.throughput >= result.c_curve.max() - 1e-6 * result.c_curve.max()
    step = result.taus[1] - result.taus[0]
    assert abs(opt.tau - result.taus[np.argmax(result.c_curve)]) <= step + 1e-12
    assert opt.pd == pytest.approx(0.9)


def test_optimize_tau_monotone_in_snr():
    low = optimize_tau(_model(sense_snr=0.1, policy=ThresholdPolicy("target-pd", 0.9)))
    high = optimize_tau(_model(sense_snr=10**-0.5,
                               policy=ThresholdPolicy("target-pd", 0.9)))
    assert high.tau <= low.tau


def test_optimize_tau_free_sensing_limit():
    model = _model(policy=ThresholdPolicy("target-pd", 0.9))
    opt = optimize_tau(model, min_pd=1e-9)
    grid_min = model.frame_duration / 201.0
    assert opt.tau <= grid_min * 2.0
    with pytest.raises(ValueError):
        optimize_tau(model, min_pd=1.5)
    with pytest.raises(ValueError):
        optimize_tau(_model())  # no policy, no explicit target


def test_optimize_tau_k():
    model = _model(policy=ThresholdPolicy("target-pd", 0.9))
    single = optimize_tau_k(model, 1)
    base = optimize_tau(model)
    assert single.vote_k == 1
    assert single.tau == base.tau and single.throughput == base.throughput
    two = optimize_tau_k(model, 2)
    eight = optimize_tau_k(model, 8)
    assert eight.tau <= two.tau  # more SUs need less sensing time


def test_optimize_tau_k_matches_joint_grid_oracle():
    from mbsense.coop import binomial_tail
    from mbsense.perf import _invert_binomial_tail, energy_pfa_for_pd

    model = _model(policy=ThresholdPolicy("target-pd", 0.9))
    n_users = 6
    taus = model.frame_duration * np.arange(1, 201) / 201.0
    best = (-1.0, None, None)
    for vote_k in range(1, n_users + 1):
        pd_user = _invert_binomial_tail(0.9, n_users, vote_k)
        for tau in taus:
            n = tau * model.sample_rate
            qfa = binomial_tail(float(energy_pfa_for_pd(pd_user, n, 0.1)),
                                n_users, vote_k)
            c = ((model.frame_duration - tau) / model.frame_duration
                 * avg_throughput(model, pfa=qfa, pd=0.9))
            if c > best[0]:
                best = (c, vote_k, tau)
    joint = optimize_tau_k(model, n_users)
    assert joint.vote_k == best[1]
    assert abs(joint.tau - best[2]) <= taus[1] - taus[0]
    assert joint.throughput >= best[0] - 1e-9 * best[0]


# ---------------------------------------------------------------------------
# Water-filling and constraints
# ---------------------------------------------------------------------------

def test_waterfill_two_band_example():
    allocation = waterfill(np.array([1.0, 0.5]), 1.0)
    assert allocation[0] == pytest.approx(1.0, abs=1e-9)
    assert allocation[1] == 0.0


def test_waterfill_equal_gains_split_evenly():
    allocation = waterfill(np.full(5, 2.0), 3.0)
    np.testing.assert_allclose(allocation, 0.6, rtol=1e-9)


def test_waterfill_flooding_asymptote():
    gains = np.array([1.0, 0.5, 2.0])
    allocation = waterfill(gains, 1e6)
    reference = allocation[np.argmin(gains)]
    expected = 1.0 / gains.min() - 1.0 / gains
    np.testing.assert_allclose(allocation - reference, expected, atol=1e-6)


def test_waterfill_kkt_conditions():
    for trial in range(20):
        rng = substream(96, "kkt", trial)
        gains = rng.uniform(0.1, 5.0, 8)
        budget = float(rng.uniform(0.5, 10.0))
        allocation = waterfill(gains, budget, noise_var=1.0)
        assert abs(allocation.sum() - budget) <= 1e-8 * budget
        active = allocation > 0
        levels = allocation[active] + 1.0 / gains[active]
        mu = levels.mean()
        assert np.all(np.abs(levels - mu) <= 1e-8 * max(1.0, mu))
        assert np.all(1.0 / gains[~active] >= mu - 1e-8)


def test_waterfill_peak_mode_uses_idle_bands_only():
    gains = np.array([1.0, 2.0, 0.5, 4.0])
    idle = np.array([True, False, True, False])
    allocation = waterfill(gains, 2.0, mode="peak-power", idle=idle)
    assert allocation[1] == 0.0 and allocation[3] == 0.0
    assert allocation.sum() == pytest.approx(2.0, rel=1e-9)
    with pytest.raises(ValueError):
        waterfill(gains, 2.0, mode="peak-power")
    with pytest.raises(ValueError):
        waterfill(np.array([0.0, 1.0]), 2.0)
    with pytest.raises(ValueError):
        waterfill(gains, -1.0)


def test_check_constraints_paper_pair():
    # two realizations at 0.5 W and 1.5 W against 1 W bounds: the
    # average admits the pair, the peak rejects it
    limits = PowerConstraintSet(avg_power=1.0, peak_power=1.0)
    checks = {c.name: c for c in check_constraints([[0.5], [1.5]], limits)}
    assert checks["avg-power"].satisfied
    assert not checks["peak-power"].satisfied
    assert checks["peak-power"].violations == 1


def test_check_constraints_zero_and_deterministic():
    limits = PowerConstraintSet(avg_power=1.0, peak_power=1.0)
    checks = {c.name: c for c in check_constraints(np.zeros((5, 3)), limits)}
    assert checks["avg-power"].satisfied and checks["avg-power"].margin == 1.0
    assert checks["peak-power"].satisfied
    constant = np.full((7, 2), 0.4)
    checks = {c.name: c for c in check_constraints(constant, limits)}
    assert checks["avg-power"].value == pytest.approx(checks["peak-power"].value)


def test_check_constraints_interference():
    limits = PowerConstraintSet(avg_interference=1.0, peak_interference=1.0)
    band_draws = {0: [[0.2, 0.3], [0.4, 0.8]]}  # second draw sums to 1.2
    checks = {c.name: c for c in check_constraints(np.zeros((2, 1)), limits,
                                                   interference_draws=band_draws)}
    assert checks["avg-interference[band 0]"].satisfied
    assert not checks["peak-interference[band 0]"].satisfied


def test_peak_implies_avg_at_equal_bounds():
    rng = substream(97)
    limits = PowerConstraintSet(avg_power=2.0, peak_power=2.0)
    for _ in range(50):
        draws = rng.uniform(0, 0.5, (20, 4))
        checks = {c.name: c for c in check_constraints(draws, limits)}
        if checks["peak-power"].satisfied:
            assert checks["avg-power"].satisfied
    # converse fails: the paper pair passes avg but not peak
    checks = {c.name: c for c in check_constraints([[0.5], [3.5]],
                                                   PowerConstraintSet(2.0, 2.0))}
    assert checks["avg-power"].satisfied and not checks["peak-power"].satisfied


# ---------------------------------------------------------------------------
# Bandwidth selection
# ---------------------------------------------------------------------------

def test_bandwidth_sweep_linear_without_split():
    model = _model()
    sweep = bandwidth_sweep(model, split_power=False)
    per_band = sweep.r / sweep.accessed
    np.testing.assert_allclose(per_band, per_band[0], rtol=1e-12)


def test_bandwidth_sweep_fig10_ordering_and_concavity():
    model = _model(num_bands=32, accessed=32)
    sweep = bandwidth_sweep(model, split_power=True)
    r_by_l = dict(zip(sweep.accessed.tolist(), sweep.r))
    assert r_by_l[10] > r_by_l[5] > r_by_l[1]
    assert np.all(np.diff(sweep.r / sweep.accessed) <= 1e-9)
    assert sweep.best_accessed == 32


def test_throughput_model_validation():
    with pytest.raises(ValueError):
        _model(power_busy=2.0)  # busy power above idle power
    with pytest.raises(ValueError):
        _model(sensing_time=0.2)  # tau >= T
    with pytest.raises(ValueError):
        _model(accessed=11)
    with pytest.raises(ValueError):
        _model(pfa=1.2)
