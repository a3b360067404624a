"""Performance metrics, the throughput model, and tradeoff optimizers.

ROC curves (closed form and Monte Carlo), multiband aggregate
probabilities, edge-detection metrics, band-occupancy error, the
four-scenario sensing-based-spectrum-sharing throughput model, frame
throughput with sensing-time dependence, the sensing-time and joint
(time, vote) optimizers, water-filling power allocation, and
power/interference constraint checks.

Monte-Carlo routines split trials into fixed-size blocks, each drawing
from its own seed substream, and aggregate commutatively; the
MBSENSE_WORKERS environment variable caps the thread pool (all cores
when unset).  Results never depend on the worker count.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .coop import binomial_tail
from .rng import substream
from .scenario import H0, H1, PuSignalModel, generate_band_frame
from .sbdetect import (DetectorSpec, ThresholdPolicy, _statistic_value,
                       coherent_pd, energy_pd, energy_pfa_for_pd)

__all__ = [
    "RocCurve",
    "ThroughputModel",
    "PowerConstraintSet",
    "OptimizationSpec",
    "roc_analytic",
    "roc_monte_carlo",
    "mb_aggregate",
    "EdgeMetrics",
    "match_edges",
    "edge_metrics",
    "bod",
    "bod_boe",
    "Rates",
    "rates",
    "avg_throughput",
    "frame_throughput",
    "optimize_tau",
    "optimize_tau_k",
    "waterfill",
    "check_constraints",
    "bandwidth_sweep",
]

_BLOCK = 4096
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _worker_count() -> int:
    env = os.environ.get("MBSENSE_WORKERS")
    if env:
        return max(1, int(env))
    return 1


def _map_blocks(fn, n_blocks: int):
    """Run fn(block_index) for every block; results are gathered by
    index so aggregation order is fixed regardless of the worker count.

    The thread pool engages only when MBSENSE_WORKERS asks for more than
    one worker: the block bodies are RNG-dominated numpy code that holds
    the GIL, so threads beyond one add contention, not speed, on stock
    CPython.  Every block draws from its own seed substream either way.
    """
    workers = min(_worker_count(), max(1, n_blocks))
    if workers == 1:
        return [fn(i) for i in range(n_blocks)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n_blocks)))


# ---------------------------------------------------------------------------
# ROC curves
# ---------------------------------------------------------------------------

@dataclass
class RocCurve:
    """Operating points (P_FA, P_D), analytic or empirical."""

    pfa: np.ndarray
    pd: np.ndarray
    source: str
    trials: int | None = None
    ci_lo: np.ndarray | None = None
    ci_hi: np.ndarray | None = None

    def __post_init__(self):
        self.pfa = np.asarray(self.pfa, float)
        self.pd = np.asarray(self.pd, float)
        if self.pfa.shape != self.pd.shape:
            raise ValueError("pfa and pd grids must share shape")
        for arr in (self.pfa, self.pd):
            if np.any((arr < 0) | (arr > 1)):
                raise ValueError("probabilities must lie in [0, 1]")
        if np.any(np.diff(self.pfa) < 0):
            raise ValueError("points must be sorted by pfa")


def roc_analytic(detector: str, n: int, snr: float, pfa_grid) -> RocCurve:
    """Closed-form ROC of the coherent or energy detector."""
    pfa_grid = np.asarray(pfa_grid, float)
    if np.any((pfa_grid <= 0) | (pfa_grid >= 1)):
        raise ValueError("pfa grid must lie strictly inside (0, 1)")
    if np.any(np.diff(pfa_grid) <= 0):
        raise ValueError("pfa grid must be strictly increasing")
    if detector == "coherent":
        pd = coherent_pd(pfa_grid, n, snr)
    elif detector == "energy":
        pd = energy_pd(pfa_grid, n, snr)
    else:
        raise ValueError("analytic ROC exists for coherent and energy only")
    return RocCurve(pfa_grid, np.asarray(pd, float), "analytic")


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054):
    """Wilson 95% score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * np.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def _simulate_statistics(detector: DetectorSpec, hypothesis: int, n: int,
                         snr: float, noise_var: float, trials: int, seed: int,
                         model: PuSignalModel | None) -> np.ndarray:
    """Trial statistics under one hypothesis, block-vectorized where the
    statistic allows it."""
    kind = detector.kind
    tag = "h1" if hypothesis == H1 else "h0"
    # keep per-block arrays around ~64 MB: cap trials * n per block
    block_trials = int(np.clip(4_000_000 // max(n, 1), 1, _BLOCK))
    n_blocks = -(-trials // block_trials)

    if kind in ("energy", "coherent", "cp"):
        def run_block(b):
            rng = substream(seed, kind, tag, b)
            count = min(block_trials, trials - b * block_trials)
            if kind == "coherent":
                y = np.sqrt(noise_var) * rng.standard_normal((count, n))
                template = np.sqrt(snr * noise_var) * np.ones(n)
                if hypothesis == H1:
                    y = y + template
                return y @ template
            if kind == "energy":
                y = np.sqrt(noise_var / 2) * (rng.standard_normal((count, n))
                                              + 1j * rng.standard_normal((count, n)))
                if hypothesis == H1:
                    y = y + np.sqrt(snr * noise_var / 2) * (
                        rng.standard_normal((count, n))
                        + 1j * rng.standard_normal((count, n)))
                return np.sum(np.abs(y) ** 2, axis=1) / noise_var
            # cp feature statistic over block-aligned OFDM frames
            nd, ncp = detector.nd, detector.ncp
            block_len = nd + ncp
            n_ofdm = n // block_len
            if n_ofdm < 2:
                raise ValueError("cp statistic needs at least two OFDM blocks")
            total = n_ofdm * block_len
            y = np.sqrt(noise_var / 2) * (rng.standard_normal((count, total))
                                          + 1j * rng.standard_normal((count, total)))
            if hypothesis == H1:
                useful = (rng.standard_normal((count, n_ofdm, nd))
                          + 1j * rng.standard_normal((count, n_ofdm, nd)))
                useful *= np.sqrt(snr * noise_var / 2)
                wave = np.concatenate([useful[:, :, nd - ncp:], useful], axis=2)
                y = y + wave.reshape(count, total)
            y3 = y.reshape(count, n_ofdm, block_len)
            head = y3[:, :, :ncp]
            tail = y3[:, :, nd:nd + ncp]
            num = np.abs(np.sum(head * np.conj(tail), axis=(1, 2)))
            den = 0.5 * np.sum(np.abs(head) ** 2 + np.abs(tail) ** 2, axis=(1, 2))
            return num / den
        return np.concatenate(_map_blocks(run_block, n_blocks))

    # generic (covariance, cyclic): one frame at a time
    if model is None:
        model = PuSignalModel("gaussian")

    def run_block(b):
        rng = substream(seed, kind, tag, b)
        count = min(block_trials, trials - b * block_trials)
        out = np.empty(count)
        for t in range(count):
            frame = generate_band_frame(model, hypothesis, snr, noise_var, n, rng)
            out[t] = _statistic_value(detector, frame)
        return out
    return np.concatenate(_map_blocks(run_block, n_blocks))


def roc_monte_carlo(detector: DetectorSpec, n: int, snr: float,
                    noise_var: float, thresholds, trials: int, seed: int,
                    model: PuSignalModel | None = None) -> RocCurve:
    """Empirical ROC: exceedance rates of simulated statistics over a
    threshold grid, with Wilson 95% intervals on P_D."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    thresholds = np.sort(np.asarray(thresholds, float))[::-1]
    stats_h0 = _simulate_statistics(detector, H0, n, snr, noise_var, trials, seed, model)
    stats_h1 = _simulate_statistics(detector, H1, n, snr, noise_var, trials, seed, model)
    pfa = np.array([(stats_h0 >= lam).mean() for lam in thresholds])
    pd = np.array([(stats_h1 >= lam).mean() for lam in thresholds])
    ci = [wilson_interval(int(round(p * trials)), trials) for p in pd]
    order = np.argsort(pfa, kind="stable")
    ci = np.asarray(ci)[order]
    return RocCurve(pfa[order], pd[order], "monte-carlo", trials,
                    ci[:, 0], ci[:, 1])


# ---------------------------------------------------------------------------
# Multiband aggregate probabilities
# ---------------------------------------------------------------------------

def _as_list(values, n_bands=None):
    out = list(values) if np.ndim(values) else [values] * (n_bands or 1)
    return out


def mb_aggregate(pd_per_band, mode: str, weights=None, priors=None,
                 pfa_per_band=None, method: str = "enumerate",
                 trials: int = 0, rng=None):
    """Aggregate per-band detection probabilities into one scalar.

    Modes: ``mean``; ``weighted`` (weights sum to 1); ``any-band``
    (probability at least one band is flagged, independent bands);
    ``modified-fa`` (probability of declaring every channel busy given
    at least one is vacant, exact enumeration over the 2^M lattice for
    M <= 20, Monte-Carlo via ``method="monte-carlo"`` beyond).

    Written in plain arithmetic so Fraction inputs stay exact in the
    mean/weighted/any-band modes.
    """
    pd_values = list(pd_per_band)
    if any(not 0 <= float(p) <= 1 for p in pd_values):
        raise ValueError("per-band probabilities must lie in [0, 1]")
    n_bands = len(pd_values)
    if mode == "mean":
        return sum(pd_values) / n_bands
    if mode == "weighted":
        if weights is None or len(list(weights)) != n_bands:
            raise ValueError("weighted mode needs one weight per band")
        weights = list(weights)
        if abs(float(sum(weights)) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")
        return sum(w * p for w, p in zip(weights, pd_values))
    if mode == "any-band":
        prod = 1
        for p in pd_values:
            prod = prod * (1 - p)
        return 1 - prod
    if mode != "modified-fa":
        raise ValueError(f"unknown aggregate mode {mode!r}")

    if priors is None or pfa_per_band is None:
        raise ValueError("modified-fa needs idle priors and per-band pfa")
    p_idle = np.asarray(list(priors), float)
    pfa_values = np.asarray(list(pfa_per_band), float)
    pd_arr = np.asarray(pd_values, float)
    if not (p_idle.size == pfa_values.size == n_bands):
        raise ValueError("priors and pfa must match the band count")
    if method == "monte-carlo":
        if trials < 1 or rng is None:
            raise ValueError("monte-carlo mode needs trials and a generator")
        occupied = rng.random((trials, n_bands)) >= p_idle
        flag_prob = np.where(occupied, pd_arr, pfa_values)
        declared_busy = rng.random((trials, n_bands)) < flag_prob
        vacant_somewhere = ~occupied.all(axis=1)
        n_cond = int(vacant_somewhere.sum())
        if n_cond == 0:
            raise ValueError("conditioning event never occurred; raise trials")
        return float((declared_busy.all(axis=1) & vacant_somewhere).sum() / n_cond)
    if n_bands > 20:
        raise ValueError("modified-fa enumeration supports M <= 20; "
                         "use method='monte-carlo' for larger M")
    # exact enumeration over the occupancy lattice
    lattice = np.arange(2 ** n_bands, dtype=np.int64)
    occupied = (lattice[:, None] >> np.arange(n_bands)) & 1  # (2^M, M)
    occ_prob = np.where(occupied, 1.0 - p_idle, p_idle).prod(axis=1)
    busy_prob = np.where(occupied, pd_arr, pfa_values).prod(axis=1)
    has_vacant = occupied.sum(axis=1) < n_bands
    denom = occ_prob[has_vacant].sum()
    if denom == 0:
        raise ValueError("a vacant channel is impossible under these priors")
    return float((occ_prob * busy_prob)[has_vacant].sum() / denom)


# ---------------------------------------------------------------------------
# Edge metrics and band-occupancy error
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EdgeMetrics:
    p_miss: float
    p_false: float
    p_error: float


def match_edges(true_edges, detected, tol: int = 2):
    """Greedy one-to-one matching of detected to true boundaries.

    A detected edge is correct iff it lies within ``tol`` bins of an
    unmatched true boundary, nearest pairs first.  Returns
    ``(n_true, n_correct, n_detected)``.
    """
    true_edges = [int(e) for e in true_edges]
    detected = [int(e) for e in detected]
    pairs = sorted((abs(t - d), i, j)
                   for i, t in enumerate(true_edges)
                   for j, d in enumerate(detected)
                   if abs(t - d) <= tol)
    used_t, used_d = set(), set()
    for _, i, j in pairs:
        if i not in used_t and j not in used_d:
            used_t.add(i)
            used_d.add(j)
    return len(true_edges), len(used_t), len(detected)


def edge_metrics(n_true: int, n_correct: int, n_detected: int,
                 nfft: int) -> EdgeMetrics:
    """Boundary miss / false-edge / average error probabilities.

    P_miss = (N_B - correct)/N_B over the true boundaries,
    P_false = (N_T - correct)/(N_FFT - N_B) over the non-boundary bins,
    and their midpoint as the average error.
    """
    if n_true < 1:
        raise ValueError("need at least one true boundary")
    if not 0 <= n_correct <= min(n_true, n_detected):
        raise ValueError("inconsistent edge counts")
    if n_true >= nfft:
        raise ValueError("more boundaries than FFT bins")
    p_miss = (n_true - n_correct) / n_true
    p_false = (n_detected - n_correct) / (nfft - n_true)
    return EdgeMetrics(p_miss, p_false, 0.5 * (p_miss + p_false))


def bod(occupied, snrs=None):
    """Band occupancy degree: per-band SNR when occupied, else 0
    (binary 1/0 variant when snrs is omitted)."""
    occupied = np.asarray(occupied, bool)
    if snrs is None:
        return occupied.astype(float)
    snrs = np.asarray(snrs, float)
    if snrs.shape != occupied.shape:
        raise ValueError("snrs must match the occupancy vector")
    return np.where(occupied, snrs, 0.0)


def bod_boe(actual_occupied, actual_snrs, est_occupied, est_snrs=None,
            binary: bool = False) -> float:
    """Band occupancy error: normalized squared BOD estimation error.

    The estimate's SNRs default to the actual ones (pure occupancy
    errors); ``binary=True`` uses the 1/0 occupancy variant.
    """
    if binary:
        actual = bod(actual_occupied)
        estimate = bod(est_occupied)
    else:
        actual = bod(actual_occupied, actual_snrs)
        estimate = bod(est_occupied, actual_snrs if est_snrs is None else est_snrs)
    denom = float(np.sum(np.abs(actual) ** 2))
    if denom == 0:
        raise ValueError("actual occupancy is all idle; BOE undefined")
    return float(np.sum(np.abs(actual - estimate) ** 2) / denom)


# ---------------------------------------------------------------------------
# Throughput model
# ---------------------------------------------------------------------------

@dataclass
class ThroughputModel:
    """Sensing-based spectrum sharing throughput parameters.

    The SU transmits at ``power_idle`` when a band is judged idle and at
    the backed-off ``power_busy`` when judged busy (zero contribution of
    the busy-decision rates under ``interweave``).  ``sense_snr``,
    ``sample_rate`` and ``policy`` drive the sensing-time dependence of
    the error probabilities in :func:`frame_throughput`.
    """

    bandwidth: float
    power_idle: float
    power_busy: float
    noise_var: float = 1.0
    interference: float = 0.0
    idle_prior: float | np.ndarray = 0.7
    pfa: float | np.ndarray = 0.1
    pd: float | np.ndarray = 0.9
    num_bands: int = 1
    accessed: int = 1
    frame_duration: float = 0.1
    sensing_time: float = 1e-3
    sample_rate: float = 10e3
    access_mode: str = "hybrid"
    sense_snr: float = 0.1
    policy: ThresholdPolicy | None = None

    def __post_init__(self):
        if not 0 <= self.power_busy <= self.power_idle:
            raise ValueError("need 0 <= power_busy <= power_idle")
        if not 0 < self.sensing_time < self.frame_duration:
            raise ValueError("need 0 < sensing_time < frame_duration")
        if not 1 <= self.accessed <= self.num_bands:
            raise ValueError("accessed band count must lie in [1, num_bands]")
        if self.access_mode not in ("interweave", "hybrid"):
            raise ValueError("access_mode must be interweave or hybrid")
        if self.bandwidth <= 0 or self.noise_var <= 0 or self.sample_rate <= 0:
            raise ValueError("bandwidth, noise_var, sample_rate must be positive")
        if self.interference < 0:
            raise ValueError("interference must be non-negative")
        for name in ("idle_prior", "pfa", "pd"):
            arr = np.broadcast_to(np.asarray(getattr(self, name), float),
                                  (self.num_bands,)).copy()
            if np.any((arr < 0) | (arr > 1)):
                raise ValueError(f"{name} must lie in [0, 1]")
            setattr(self, name, arr)


@dataclass(frozen=True)
class Rates:
    r00: float
    r01: float
    r11: float
    r10: float


def rates(model: ThroughputModel, power_split: int = 1) -> Rates:
    """Shannon rates of the four decision/truth scenarios (bit/s).

    ``power_split`` divides both transmit powers (uniform allocation
    over that many accessed bands).
    """
    if power_split < 1:
        raise ValueError("power_split must be >= 1")
    b = model.bandwidth
    p0 = model.power_idle / power_split
    p1 = model.power_busy / power_split
    noisy = model.interference + model.noise_var
    r00 = b * np.log2(1.0 + p0 / model.noise_var)
    r01 = b * np.log2(1.0 + p0 / noisy) if np.isfinite(noisy) else 0.0
    r11 = b * np.log2(1.0 + p1 / noisy) if np.isfinite(noisy) else 0.0
    r10 = b * np.log2(1.0 + p1 / model.noise_var)
    return Rates(float(r00), float(r01), float(r11), float(r10))


def avg_throughput(model: ThroughputModel, accessed: int | None = None,
                   split_power: bool = False, pfa=None, pd=None) -> float:
    """Average network throughput R over the accessed bands (bit/s).

    Per band: p(idle) [r00 (1-P_FA) + r10 P_FA]
            + p(busy) [r01 (1-P_D) + r11 P_D],
    with the r10 and r11 contributions zeroed under interweave access.
    ``pfa``/``pd`` override the model's per-band arrays when given.
    """
    l = model.accessed if accessed is None else int(accessed)
    if not 1 <= l <= model.num_bands:
        raise ValueError("accessed band count out of range")
    r = rates(model, l if split_power else 1)
    pfa_arr = model.pfa if pfa is None else np.broadcast_to(
        np.asarray(pfa, float), (model.num_bands,))
    pd_arr = model.pd if pd is None else np.broadcast_to(
        np.asarray(pd, float), (model.num_bands,))
    p_idle = model.idle_prior[:l]
    p_busy = 1.0 - p_idle
    interweave = model.access_mode == "interweave"
    r10 = 0.0 if interweave else r.r10
    r11 = 0.0 if interweave else r.r11
    per_band = (p_idle * (r.r00 * (1.0 - pfa_arr[:l]) + r10 * pfa_arr[:l])
                + p_busy * (r.r01 * (1.0 - pd_arr[:l]) + r11 * pd_arr[:l]))
    return float(per_band.sum())


def _sensing_probs(model: ThroughputModel, tau: float):
    """(pfa, pd) at sensing time tau under the model's threshold policy."""
    policy = model.policy
    if policy is None or policy.mode == "fixed":
        return model.pfa, model.pd
    n = tau * model.sample_rate
    if policy.mode == "target-pd":
        beta = policy.level
        pfa = energy_pfa_for_pd(beta, n, model.sense_snr)
        return np.full(model.num_bands, float(pfa)), np.full(model.num_bands, beta)
    pfa = policy.level
    pd = energy_pd(pfa, n, model.sense_snr)
    return np.full(model.num_bands, pfa), np.full(model.num_bands, float(pd))


@dataclass
class FrameThroughput:
    c: float
    taus: np.ndarray
    c_curve: np.ndarray


def frame_throughput(model: ThroughputModel, tau_grid=None,
                     split_power: bool = False) -> FrameThroughput:
    """Frame-averaged throughput C = (T - tau)/T * R.

    The sensing error probabilities are recomputed at each tau from
    N = tau * sample_rate under the model's threshold policy.  Returns
    C at the model's own sensing time plus the C(tau) curve over the
    given (or a default 200-point) grid.
    """
    t_frame = model.frame_duration

    def c_of(tau):
        pfa, pd = _sensing_probs(model, tau)
        r = avg_throughput(model, split_power=split_power, pfa=pfa, pd=pd)
        return (t_frame - tau) / t_frame * r

    if tau_grid is None:
        tau_grid = t_frame * np.arange(1, 201) / 201.0
    tau_grid = np.asarray(tau_grid, float)
    if np.any((tau_grid <= 0) | (tau_grid >= t_frame)):
        raise ValueError("tau grid must lie strictly inside (0, T)")
    curve = np.array([c_of(t) for t in tau_grid])
    return FrameThroughput(float(c_of(model.sensing_time)), tau_grid, curve)


# ---------------------------------------------------------------------------
# Sensing-time optimizers
# ---------------------------------------------------------------------------

def _golden_max(fn, lo: float, hi: float, tol: float):
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fn(d)
    x = 0.5 * (a + b)
    return x, fn(x)


def _refine_on_grid(fn, taus, values, t_frame):
    """Golden-section refinement of the best coarse-grid bracket; the
    search stays within the grid's hull and never returns a value worse
    than the best grid point."""
    best = int(np.argmax(values))
    lo = taus[max(best - 1, 0)]
    hi = taus[min(best + 1, taus.size - 1)]
    tau_ref, c_ref = _golden_max(fn, lo, hi, tol=t_frame * 1e-9)
    if c_ref < values[best]:
        return float(taus[best]), float(values[best])
    return float(tau_ref), float(c_ref)


@dataclass(frozen=True)
class TauOpt:
    tau: float
    throughput: float
    pfa: float
    pd: float


def optimize_tau(model: ThroughputModel, min_pd: float | None = None,
                 grid_points: int = 200, split_power: bool = False) -> TauOpt:
    """Sensing time maximizing C(tau) subject to P_D >= min_pd.

    The detection constraint binds, so the search runs under the
    target-P_D threshold policy (min_pd defaults to the model policy's
    level).  Coarse grid then golden-section refinement of the best
    bracket; the result is never worse than the best grid point.
    """
    if min_pd is None:
        if model.policy is None or model.policy.mode != "target-pd":
            raise ValueError("min_pd required unless the model policy targets P_D")
        min_pd = model.policy.level
    if not 0.0 < min_pd < 1.0:
        raise ValueError("min_pd must lie strictly inside (0, 1)")
    bound = ThroughputModel(**{**model.__dict__,
                               "policy": ThresholdPolicy("target-pd", min_pd)})
    t_frame = bound.frame_duration

    def c_of(tau):
        pfa, pd = _sensing_probs(bound, tau)
        return (t_frame - tau) / t_frame * avg_throughput(
            bound, split_power=split_power, pfa=pfa, pd=pd)

    taus = t_frame * np.arange(1, grid_points + 1) / (grid_points + 1.0)
    values = np.array([c_of(t) for t in taus])
    tau_ref, c_ref = _refine_on_grid(c_of, taus, values, t_frame)
    pfa, pd = _sensing_probs(bound, tau_ref)
    return TauOpt(float(tau_ref), float(c_ref), float(pfa[0]), float(pd[0]))


def _invert_binomial_tail(target: float, n_users: int, vote_k: int) -> float:
    """Per-user probability p with tail(p; n_users, vote_k) = target."""
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if binomial_tail(mid, n_users, vote_k) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class TauKOpt:
    tau: float
    vote_k: int
    throughput: float
    per_k: tuple


def optimize_tau_k(model: ThroughputModel, n_users: int,
                   grid_points: int = 200, min_pd: float | None = None,
                   split_power: bool = False) -> TauKOpt:
    """Jointly optimize sensing time and the hard-fusion vote count.

    For each k the fused detection target Q_D = min_pd is pushed down to
    the per-user operating point through the binomial tail, the fused
    Q_FA replaces the single-user P_FA, and the best sensing time is
    found as in :func:`optimize_tau`; the best (tau, k) pair wins.
    With n_users = 1 this reduces exactly to the single-user optimum.
    """
    if n_users < 1:
        raise ValueError("need at least one SU")
    if min_pd is None:
        if model.policy is None or model.policy.mode != "target-pd":
            raise ValueError("min_pd required unless the model policy targets P_D")
        min_pd = model.policy.level
    t_frame = model.frame_duration
    results = []
    for vote_k in range(1, n_users + 1):
        # single user: the fused target is the per-user target, exactly
        pd_user = min_pd if n_users == 1 else _invert_binomial_tail(
            min_pd, n_users, vote_k)

        def c_of(tau, pd_user=pd_user, vote_k=vote_k):
            n = tau * model.sample_rate
            pfa_user = energy_pfa_for_pd(pd_user, n, model.sense_snr)
            qfa = binomial_tail(float(pfa_user), n_users, vote_k)
            return (t_frame - tau) / t_frame * avg_throughput(
                model, split_power=split_power, pfa=qfa, pd=min_pd)

        taus = t_frame * np.arange(1, grid_points + 1) / (grid_points + 1.0)
        values = np.array([c_of(t) for t in taus])
        tau_ref, c_ref = _refine_on_grid(c_of, taus, values, t_frame)
        results.append((vote_k, tau_ref, c_ref))
    best_k, best_tau, best_c = max(results, key=lambda r: r[2])
    return TauKOpt(best_tau, best_k, best_c, tuple(results))


# ---------------------------------------------------------------------------
# Power allocation and constraints
# ---------------------------------------------------------------------------

def waterfill(gains, budget: float, noise_var: float = 1.0,
              mode: str = "avg-power", idle=None) -> np.ndarray:
    """Water-filling power allocation P_m = (mu - noise_var/g_m)^+.

    The water level is bisected until the budget matches to
    1e-9 * budget, then snapped to the exact KKT solution of the
    identified active set.  ``avg-power`` mode allocates over all bands;
    ``peak-power`` mode only over the bands currently sensed idle
    (``idle`` mask), reflecting allocation after sensing.
    """
    gains = np.asarray(gains, float)
    if np.any(gains <= 0):
        raise ValueError("gains must be positive")
    if budget <= 0:
        raise ValueError("budget must be positive")
    if mode not in ("avg-power", "peak-power"):
        raise ValueError("mode must be avg-power or peak-power")
    if mode == "peak-power":
        if idle is None:
            raise ValueError("peak-power mode needs the idle decision mask")
        candidates = np.asarray(idle, bool)
        if candidates.shape != gains.shape:
            raise ValueError("idle mask must match the gain vector")
        if not candidates.any():
            return np.zeros_like(gains)
    else:
        candidates = np.ones(gains.shape, bool)
    floors = noise_var / gains[candidates]
    lo, hi = float(floors.min()), float(floors.max() + budget)
    for _ in range(200):
        mu = 0.5 * (lo + hi)
        total = np.maximum(mu - floors, 0.0).sum()
        if abs(total - budget) <= 1e-9 * budget:
            break
        if total < budget:
            lo = mu
        else:
            hi = mu
    active = mu - floors > 0
    if not active.any():
        active[np.argmin(floors)] = True
    mu = (budget + floors[active].sum()) / active.sum()
    alloc_c = np.maximum(mu - floors, 0.0) * active
    allocation = np.zeros_like(gains)
    allocation[candidates] = alloc_c
    return allocation


@dataclass(frozen=True)
class PowerConstraintSet:
    """Average/peak transmit power and interference bounds (None = off)."""

    avg_power: float | None = None
    peak_power: float | None = None
    avg_interference: float | None = None
    peak_interference: float | None = None

    def __post_init__(self):
        for name in ("avg_power", "peak_power", "avg_interference",
                     "peak_interference"):
            bound = getattr(self, name)
            if bound is not None and bound < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class ConstraintCheck:
    name: str
    value: float
    bound: float
    satisfied: bool
    violations: int
    margin: float


def check_constraints(power_draws, limits: PowerConstraintSet,
                      interference_draws=None):
    """Evaluate power and interference constraints over drawn realizations.

    ``power_draws`` is (trials, channels): the average constraint bounds
    the mean of the per-realization totals, the peak constraint bounds
    every realization.  ``interference_draws`` maps band -> (trials,
    users-on-band) arrays checked the same way against the interference
    bounds.  Returns a list of :class:`ConstraintCheck`.
    """
    draws = np.atleast_2d(np.asarray(power_draws, float))
    totals = draws.sum(axis=1)
    checks = []
    if limits.avg_power is not None:
        value = float(totals.mean())
        checks.append(ConstraintCheck("avg-power", value, limits.avg_power,
                                      value <= limits.avg_power,
                                      int(value > limits.avg_power),
                                      limits.avg_power - value))
    if limits.peak_power is not None:
        worst = float(totals.max())
        n_violations = int((totals > limits.peak_power).sum())
        checks.append(ConstraintCheck("peak-power", worst, limits.peak_power,
                                      n_violations == 0, n_violations,
                                      limits.peak_power - worst))
    if interference_draws:
        for band, band_draws in sorted(interference_draws.items()):
            band_draws = np.atleast_2d(np.asarray(band_draws, float))
            band_totals = band_draws.sum(axis=1)
            if limits.avg_interference is not None:
                value = float(band_totals.mean())
                checks.append(ConstraintCheck(
                    f"avg-interference[band {band}]", value,
                    limits.avg_interference, value <= limits.avg_interference,
                    int(value > limits.avg_interference),
                    limits.avg_interference - value))
            if limits.peak_interference is not None:
                worst = float(band_totals.max())
                n_violations = int((band_totals > limits.peak_interference).sum())
                checks.append(ConstraintCheck(
                    f"peak-interference[band {band}]", worst,
                    limits.peak_interference, n_violations == 0, n_violations,
                    limits.peak_interference - worst))
    return checks


@dataclass
class BandwidthSweep:
    accessed: np.ndarray
    r: np.ndarray
    c: np.ndarray
    best_accessed: int


def bandwidth_sweep(model: ThroughputModel, max_accessed: int | None = None,
                    split_power: bool = True) -> BandwidthSweep:
    """R(l) and C(l) as the accessed-band count l sweeps 1..M.

    With ``split_power`` the idle/busy powers are divided uniformly over
    the l accessed bands.  Reports the throughput-maximizing l.
    """
    top = model.num_bands if max_accessed is None else int(max_accessed)
    if not 1 <= top <= model.num_bands:
        raise ValueError("max_accessed out of range")
    ls = np.arange(1, top + 1)
    r_values = np.array([avg_throughput(model, l, split_power=split_power)
                         for l in ls])
    scale = (model.frame_duration - model.sensing_time) / model.frame_duration
    c_values = scale * r_values
    return BandwidthSweep(ls, r_values, c_values, int(ls[np.argmax(c_values)]))


@dataclass(frozen=True)
class OptimizationSpec:
    """A named objective with inequality constraints g_i(o) <= b_i."""

    objective: object
    variables: tuple
    constraints: tuple = ()
    bounds: tuple = ()

    def __post_init__(self):
        if not self.variables:
            raise ValueError("need at least one optimization variable")
        if len(self.constraints) != len(self.bounds):
            raise ValueError("each constraint needs a bound")
