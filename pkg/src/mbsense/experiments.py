"""Experiment implementations behind the CLI.

Each experiment composes the library modules and returns named series:
``{series_name: (header, rows)}``.  Series are deterministic functions
of (config, seed); the CLI turns them into CSV files and figures.
"""

import numpy as np

from . import coop, perf, scenario, widebandest
from .config import ConfigError
from .rng import substream
from .sbdetect import DetectorSpec, ThresholdPolicy, calibrate_threshold

__all__ = ["run_experiment", "SCHEMAS"]

SCHEMAS = {
    "roc": ("detector", "pfa", "pd", "ci_lo", "ci_hi"),
    "coop_roc": ("rule", "k", "K", "qfa", "qd"),
    "throughput": ("mode", "l", "tau_s", "R_bps", "C_bps"),
    "tradeoff": ("tau_s", "pd", "pfa", "C_bps"),
    "tau_k": ("k", "tau_s", "C_bps"),
    "sampling_cost": ("K", "M", "diversity", "cost_hz"),
    "edges": ("scene", "j", "delta", "p_me", "p_fe", "p_e"),
    "cs": ("L", "O", "recovery_rate"),
    "mb_metrics": ("mode", "value"),
    "waterfill": ("band", "gain", "power_w"),
    "bandwidth": ("l", "R_bps", "C_bps"),
}

_RULES = {"or": lambda k_users: 1,
          "and": lambda k_users: k_users,
          "majority": lambda k_users: -(-k_users // 2)}


def _detector_kinds(det):
    return det.get("kinds") or [det.get("kind", "energy")]


def _roc(cfg, seed):
    det = cfg["detector"]
    scen = cfg["scenario"]
    snr = scen.get("snr", 0.1)
    noise_var = scen.get("noise_var", 1.0)
    trials = cfg.get("trials", 10000)
    grid = np.asarray(det.get("pfa_grid", [0.01, 0.05, 0.1, 0.2, 0.5]))
    rows = []
    for kind in _detector_kinds(det):
        if kind in ("energy", "coherent"):
            n = det.get("n", scen.get("n_samples", 500))
            thresholds = [calibrate_threshold(kind, ThresholdPolicy("target-pfa", g),
                                              n, snr, noise_var) for g in grid]
            curve = perf.roc_monte_carlo(DetectorSpec(kind), n, snr, noise_var,
                                         thresholds, trials, seed)
        elif kind == "cp":
            nd, ncp = det.get("nd", 64), det.get("ncp", 16)
            n = det.get("n_blocks", 500) * (nd + ncp)
            spec = DetectorSpec("cp", nd=nd, ncp=ncp)
            cp_trials = max(200, trials // 10)
            cal = perf._simulate_statistics(spec, scenario.H0, n, snr, noise_var,
                                            cp_trials, seed + 1, None)
            thresholds = [float(np.quantile(cal, 1.0 - g)) for g in grid]
            curve = perf.roc_monte_carlo(spec, n, snr, noise_var, thresholds,
                                         cp_trials, seed)
        else:
            raise ConfigError(f"roc experiment does not support kind {kind!r}")
        for pfa, pd, lo, hi in zip(curve.pfa, curve.pd, curve.ci_lo, curve.ci_hi):
            rows.append((kind, pfa, pd, lo, hi))
    return {"roc": rows}


def _coop_roc(cfg, seed):
    det = cfg["detector"]
    scen = cfg["scenario"]
    fusion = cfg["fusion"]
    n = det.get("n", scen.get("n_samples", 125))
    snr = scen.get("snr", 0.1)
    grid = np.asarray(det.get("pfa_grid", [0.01, 0.05, 0.1, 0.2, 0.5]))
    analytic = perf.roc_analytic(det.get("kind", "energy"), n, snr, grid)
    rows = []
    for rule in fusion.get("rules", ["or"]):
        if rule not in _RULES:
            raise ConfigError(f"unknown fusion rule {rule!r}")
        for k_users in fusion.get("users", [1]):
            vote_k = _RULES[rule](k_users)
            for pfa_u, pd_u in zip(analytic.pfa, analytic.pd):
                qd, qfa = coop.fused_probabilities(float(pd_u), float(pfa_u),
                                                   k_users, vote_k)
                rows.append((rule, vote_k, k_users, qfa, qd))
    return {"coop_roc": rows}


def _build_model(block, **overrides):
    params = dict(
        bandwidth=block.get("bandwidth", 6e6),
        power_idle=block.get("power_idle", 1.0),
        power_busy=block.get("power_busy", 0.4),
        noise_var=block.get("noise_var", 1.0),
        interference=10.0 ** (block.get("interference_dbw", -20.0) / 10.0),
        idle_prior=block.get("idle_prior", 0.7),
        pfa=block.get("pfa", 0.1),
        pd=block.get("pd", 0.9),
        num_bands=block.get("num_bands", 10),
        accessed=block.get("accessed", block.get("num_bands", 10)),
        frame_duration=block.get("frame_duration", 0.1),
        sensing_time=block.get("sensing_time", 2e-3),
        sample_rate=block.get("sample_rate", 1e4),
        sense_snr=block.get("sense_snr", 0.1),
    )
    params.update(overrides)
    return perf.ThroughputModel(**params)


def _throughput(cfg, seed):
    block = cfg["throughput"]
    accessed_list = block.get("accessed_list", [block.get("accessed", 1)])
    rows = []
    for mode in ("interweave", "hybrid"):
        model = _build_model(block, access_mode=mode)
        for l in accessed_list:
            r = perf.avg_throughput(model, l, split_power=True)
            scale = (model.frame_duration - model.sensing_time) / model.frame_duration
            rows.append((mode, l, model.sensing_time, r, scale * r))
    return {"throughput": rows}


def _tradeoff_tau(cfg, seed):
    block = cfg["throughput"]
    min_pd = block.get("min_pd", 0.9)
    model = _build_model(block, policy=ThresholdPolicy("target-pd", min_pd))
    result = perf.frame_throughput(model)
    rows = []
    for tau, c in zip(result.taus, result.c_curve):
        pfa, pd = perf._sensing_probs(model, tau)
        rows.append((tau, pd[0], pfa[0], c))
    return {"tradeoff": rows}


def _tradeoff_tau_k(cfg, seed):
    block = cfg["throughput"]
    min_pd = block.get("min_pd", 0.9)
    users = block.get("users", 4)
    model = _build_model(block, policy=ThresholdPolicy("target-pd", min_pd))
    joint = perf.optimize_tau_k(model, users)
    tau_k_rows = [(k, tau, c) for k, tau, c in joint.per_k]
    # C(tau) curve at the winning vote count
    pd_user = perf._invert_binomial_tail(min_pd, users, joint.vote_k)
    taus = model.frame_duration * np.arange(1, 201) / 201.0
    rows = []
    for tau in taus:
        n = tau * model.sample_rate
        pfa_user = perf.energy_pfa_for_pd(pd_user, n, model.sense_snr)
        qfa = coop.binomial_tail(float(pfa_user), users, joint.vote_k)
        c = (model.frame_duration - tau) / model.frame_duration * perf.avg_throughput(
            model, pfa=qfa, pd=min_pd)
        rows.append((tau, min_pd, qfa, c))
    return {"tradeoff": rows, "tau_k": tau_k_rows}


def _sampling_cost(cfg, seed):
    block = cfg["assignment"]
    users_list = block.get("users_list", [block.get("users", 6)])
    bands_list = block.get("num_bands_list", [block.get("num_bands", 12)])
    bandwidth = block.get("band_bandwidth", 6e6)
    rows = []
    for n_users in users_list:
        for n_bands in bands_list:
            for diversity in block.get("diversity_list", [1]):
                if diversity > n_users:
                    continue
                matrix = coop.assign_uniform(n_users, n_bands, diversity)
                cost = coop.sampling_cost(matrix, bandwidth)
                rows.append((n_users, n_bands, diversity, cost.max_hz))
    return {"sampling_cost": rows}


def _edges(cfg, seed):
    block = cfg["edges"]
    nfft = block.get("nfft", 1024)
    num_scales = block.get("num_scales", 3)
    noise_floor = block.get("noise_floor", 0.0)
    n_scenes = block.get("scenes", 20)
    n_edges = block.get("num_edges", 4)
    min_width = block.get("min_width", 16)
    delta_cfg = block.get("delta")
    rows = []
    for scene in range(n_scenes):
        rng = substream(seed, "edges", scene)
        edges = _random_edges(rng, nfft, n_edges, min_width)
        levels = _random_levels(rng, n_edges + 1)
        psd, true_edges = scenario.synthesize_wideband_psd(
            edges, levels, nfft, noise_floor, rng if noise_floor else None)
        for j in range(1, num_scales + 1):
            config = widebandest.WaveletConfig(num_scales=j, nfft=nfft)
            product = widebandest.wmp(psd, config)
            guard = int(np.ceil(6.0 * config.scales[-1])) + 1
            delta = (widebandest.default_edge_threshold(psd, config)
                     if delta_cfg is None else delta_cfg)
            detected = widebandest.threshold_edges(product, delta, psd, guard=guard)
            n_true, n_ok, n_det = perf.match_edges(true_edges, detected)
            metrics = perf.edge_metrics(n_true, n_ok, n_det, nfft)
            rows.append((scene, j, delta, metrics.p_miss, metrics.p_false,
                         metrics.p_error))
    return {"edges": rows}


def _random_edges(rng, nfft, n_edges, min_width):
    guard = 64
    while True:
        edges = np.sort(rng.integers(guard, nfft - guard, n_edges))
        if edges.size < 2 or np.all(np.diff(edges) >= min_width):
            return edges


def _random_levels(rng, n_levels, min_ratio=2.0, max_ratio=4.0):
    levels = [float(rng.uniform(1.0, 4.0))]
    for _ in range(n_levels - 1):
        ratio = rng.uniform(min_ratio, max_ratio)
        down = rng.random() < 0.5 and levels[-1] / ratio >= 0.25
        levels.append(levels[-1] / ratio if down else levels[-1] * ratio)
    return levels


def _cs(cfg, seed):
    block = cfg["cs"]
    n = block.get("n", 256)
    sparsities = block.get("sparsity_list", [2, 4, 8])
    measurement_counts = block.get("measurements_list", [32, 64, 96])
    n_seeds = block.get("seeds", 50)
    basis = widebandest.dft_basis(n)
    rows = []
    for sparsity in sparsities:
        for n_meas in measurement_counts:
            hits = 0
            for s in range(n_seeds):
                rng = substream(seed, "cs", sparsity, n_meas, s)
                support = rng.choice(n, size=sparsity, replace=False)
                coeffs = np.zeros(n, complex)
                coeffs[support] = ((1.0 + rng.random(sparsity))
                                   * np.exp(2j * np.pi * rng.random(sparsity)))
                signal = basis @ coeffs
                phi = widebandest.gaussian_measurement(n_meas, n, rng)
                z = widebandest.cs_measure(signal, phi)
                result = widebandest.omp_recover(z, phi, basis, max_atoms=sparsity)
                hits += set(result.support.tolist()) == set(support.tolist())
            rows.append((sparsity, n_meas, hits / n_seeds))
    return {"cs": rows}


def _mb_metrics(cfg, seed):
    det = cfg["detector"]
    scen = cfg["scenario"]
    n_bands = scen.get("num_bands", 8)
    n = det.get("n", scen.get("n_samples", 125))
    snr = np.broadcast_to(np.asarray(scen.get("snr", 0.1), float), (n_bands,))
    idle = np.broadcast_to(np.asarray(scen.get("idle_prior", 0.7), float), (n_bands,))
    target = 0.1
    pd = np.asarray([perf.energy_pd(target, n, g) for g in snr])
    pfa = np.full(n_bands, target)
    rows = [
        ("mean", perf.mb_aggregate(pd, "mean")),
        ("weighted", perf.mb_aggregate(pd, "weighted",
                                       weights=[1.0 / n_bands] * n_bands)),
        ("any-band", perf.mb_aggregate(pd, "any-band")),
        ("modified-fa", perf.mb_aggregate(pd, "modified-fa", priors=idle,
                                          pfa_per_band=pfa)),
    ]
    return {"mb_metrics": rows}


def _waterfill(cfg, seed):
    block = cfg["waterfill"]
    gains = np.asarray(block["gains"], float)
    budget = block["budget"]
    noise_var = block.get("noise_var", 1.0)
    allocation = perf.waterfill(gains, budget, noise_var)
    rows = [(m, gains[m], allocation[m]) for m in range(gains.size)]
    return {"waterfill": rows}


def _bandwidth_sweep(cfg, seed):
    model = _build_model(cfg["throughput"])
    sweep = perf.bandwidth_sweep(model)
    rows = [(int(l), r, c) for l, r, c in zip(sweep.accessed, sweep.r, sweep.c)]
    return {"bandwidth": rows}


_RUNNERS = {
    "roc": _roc,
    "coop-roc": _coop_roc,
    "throughput": _throughput,
    "tradeoff-tau": _tradeoff_tau,
    "tradeoff-tau-k": _tradeoff_tau_k,
    "sampling-cost": _sampling_cost,
    "edges": _edges,
    "cs": _cs,
    "mb-metrics": _mb_metrics,
    "waterfill": _waterfill,
    "bandwidth-sweep": _bandwidth_sweep,
}


def run_experiment(cfg: dict, seed: int) -> dict:
    """Execute the configured experiment; returns {series_name: rows}."""
    runner = _RUNNERS[cfg["experiment"]]
    return runner(cfg, seed)
