"""Multiband sensing strategies over M subchannels.

Serial scans, two-stage coarse/fine sensing, sequential probability
ratio tests, frequency-domain parallel detection, weighted energy
combining, and joint threshold design that maximizes throughput under a
per-band detection constraint.

FFT convention: unnormalized forward transform, so Parseval reads
sum |Y|^2 = N * sum |y|^2.
"""

from dataclasses import dataclass

import numpy as np

from .scenario import H0, H1, UNDECIDED
from .sbdetect import (DetectorSpec, _statistic_value, energy_pfa_for_pd,
                       qfunc_inv)

__all__ = [
    "MultibandDecision",
    "SerialSchedule",
    "MjdDesign",
    "validate_band_map",
    "psd_band_energies",
    "parallel_decide",
    "weighted_energy",
    "serial_scan",
    "two_stage_scan",
    "sprt_scan",
    "mjd_optimize_thresholds",
]


@dataclass
class MultibandDecision:
    """Per-band decisions with the statistics and thresholds behind them."""

    decisions: np.ndarray
    thresholds: np.ndarray
    stats: np.ndarray

    def __post_init__(self):
        self.decisions = np.asarray(self.decisions, int)
        self.thresholds = np.asarray(self.thresholds, float)
        self.stats = np.asarray(self.stats, float)
        if not (self.decisions.size == self.thresholds.size == self.stats.size):
            raise ValueError("decision, threshold, and stat vectors must share length")

    @property
    def num_bands(self) -> int:
        return self.decisions.size


@dataclass(frozen=True)
class SerialSchedule:
    """Visit order and timing for one-band-at-a-time sensing."""

    visit_order: tuple
    per_band_time: float
    tuning_delay: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "visit_order", tuple(int(b) for b in self.visit_order))
        if self.per_band_time <= 0:
            raise ValueError("per_band_time must be positive")
        if self.tuning_delay < 0:
            raise ValueError("tuning_delay must be non-negative")
        if len(set(self.visit_order)) != len(self.visit_order):
            raise ValueError("schedule may visit each band at most once")


def validate_band_map(band_map, nfft: int):
    """Check half-open bin ranges are disjoint and inside [0, nfft)."""
    ranges = [(int(a), int(b)) for a, b in band_map]
    for a, b in ranges:
        if not (0 <= a < b <= nfft):
            raise ValueError(f"band range ({a}, {b}) outside [0, {nfft})")
    for (a1, b1), (a2, b2) in zip(sorted(ranges), sorted(ranges)[1:]):
        if b1 > a2:
            raise ValueError("band ranges overlap")
    return ranges


def psd_band_energies(samples, nfft: int, band_map) -> np.ndarray:
    """Frequency-domain energy per band from one nfft-point transform."""
    samples = np.asarray(samples)
    if samples.size != nfft:
        raise ValueError("need exactly nfft samples")
    ranges = validate_band_map(band_map, nfft)
    spectrum = np.abs(np.fft.fft(samples)) ** 2
    return np.array([spectrum[a:b].sum() for a, b in ranges])


def parallel_decide(energies, thresholds) -> MultibandDecision:
    """Element-wise threshold test (ties decide H1)."""
    energies = np.asarray(energies, float)
    thresholds = np.broadcast_to(np.asarray(thresholds, float), energies.shape)
    decisions = np.where(energies >= thresholds, H1, H0)
    return MultibandDecision(decisions, thresholds.copy(), energies)


def weighted_energy(bin_energies, weights) -> float:
    """Linear energy combiner sum_n w_n |Y(n)|^2 over one band's bins.

    The weight design for correlated occupancy is out of scope; weights
    are caller-supplied (uniform weights reduce to the plain band
    energy).
    """
    bin_energies = np.asarray(bin_energies, float)
    weights = np.asarray(weights, float)
    if weights.shape != bin_energies.shape:
        raise ValueError("weights must match the band's bin count")
    if np.any(weights < 0):
        raise ValueError("weights must be non-negative")
    if not np.any(weights > 0):
        raise ValueError("weights must not be all zero")
    return float(np.sum(weights * bin_energies))


def serial_scan(frames, schedule: SerialSchedule, detector: DetectorSpec,
                thresholds):
    """Sense bands one at a time following the schedule.

    Unvisited bands are left UNDECIDED (downstream access logic treats
    them as occupied).  Returns ``(decision, elapsed_seconds)`` where
    elapsed time charges one tuning delay per visited band.
    """
    n_bands = len(frames)
    thresholds = np.broadcast_to(np.asarray(thresholds, float), (n_bands,))
    decisions = np.full(n_bands, UNDECIDED, dtype=int)
    stats = np.full(n_bands, np.nan)
    for band in schedule.visit_order:
        if not 0 <= band < n_bands:
            raise ValueError(f"band {band} outside scenario")
        stats[band] = _statistic_value(detector, frames[band])
        decisions[band] = H1 if stats[band] >= thresholds[band] else H0
    elapsed = len(schedule.visit_order) * (schedule.per_band_time + schedule.tuning_delay)
    return MultibandDecision(decisions, thresholds.copy(), stats), elapsed


def two_stage_scan(frames, coarse: DetectorSpec, fine: DetectorSpec,
                   coarse_threshold: float, fine_threshold: float):
    """Coarse energy screen, fine stage only for bands that pass it.

    A band whose coarse statistic reaches the coarse threshold is
    declared occupied immediately; the remaining bands get the fine
    detector's decision.  Returns ``(decision, fine_invocations)``.
    """
    if coarse.kind != "energy":
        raise ValueError("the coarse stage is an energy detector")
    n_bands = len(frames)
    decisions = np.empty(n_bands, dtype=int)
    stats = np.empty(n_bands)
    thresholds = np.empty(n_bands)
    fine_count = 0
    for m, frame in enumerate(frames):
        coarse_value = _statistic_value(coarse, frame)
        if coarse_value >= coarse_threshold:
            decisions[m] = H1
            stats[m] = coarse_value
            thresholds[m] = coarse_threshold
        else:
            fine_count += 1
            fine_value = _statistic_value(fine, frame)
            decisions[m] = H1 if fine_value >= fine_threshold else H0
            stats[m] = fine_value
            thresholds[m] = fine_threshold
    return MultibandDecision(decisions, thresholds, stats), fine_count


def sprt_scan(samples, lower: float, upper: float, max_n: int,
              snr: float, noise_var: float):
    """Sequential probability ratio test on one band's sample stream.

    Gaussian mean-shift model with known snr and noise power: the
    log-likelihood ratio accumulates sample by sample until it leaves
    (lower, upper) or ``max_n`` samples are spent, in which case the
    final value is compared against the midpoint.  Returns
    ``(decision, samples_used, llr)``.
    """
    if not lower < upper:
        raise ValueError("need lower < upper")
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    if snr <= 0 or noise_var <= 0:
        raise ValueError("snr and noise_var must be positive")
    mean_shift = np.sqrt(snr * noise_var)
    llr = 0.0
    used = 0
    for value in np.asarray(samples).real.ravel():
        llr += (mean_shift * value - 0.5 * mean_shift ** 2) / noise_var
        used += 1
        if llr <= lower:
            return H0, used, llr
        if llr >= upper:
            return H1, used, llr
        if used >= max_n:
            break
    midpoint = 0.5 * (lower + upper)
    return (H1 if llr >= midpoint else H0), used, llr


@dataclass
class MjdDesign:
    """Jointly designed per-band thresholds and their operating point."""

    thresholds: np.ndarray
    pfa: np.ndarray
    pd: np.ndarray
    feasible: np.ndarray


def mjd_optimize_thresholds(snrs, n: int, min_pd, priors=None,
                            rates=None) -> MjdDesign:
    """Throughput-maximizing energy thresholds under P_D,m >= min_pd.

    With independent bands the joint problem decouples: expected
    throughput falls as either error probability rises and P_D falls
    monotonically in the threshold, so the optimum raises every
    threshold until the detection constraint binds, i.e. P_D,m = min_pd
    exactly.  Higher-SNR bands end up with lower false-alarm rates.

    ``priors`` and per-band ``rates`` are accepted for interface
    completeness and validated when given; the decoupled optimum does
    not depend on them (throughput is monotone in both error rates
    whenever the idle-access rate beats the collision rates).
    """
    snrs = np.atleast_1d(np.asarray(snrs, float))
    if np.any(snrs < 0):
        raise ValueError("snrs must be non-negative")
    min_pd = np.broadcast_to(np.asarray(min_pd, float), snrs.shape)
    if np.any((min_pd <= 0.0) | (min_pd >= 1.0)):
        raise ValueError("min_pd must lie strictly inside (0, 1)")
    if priors is not None:
        priors = np.broadcast_to(np.asarray(priors, float), snrs.shape)
        if np.any((priors < 0) | (priors > 1)):
            raise ValueError("priors must lie in [0, 1]")
    if rates is not None and np.any(np.asarray(rates, float) < 0):
        raise ValueError("rates must be non-negative")
    thresholds = (n * (1.0 + snrs)
                  + np.sqrt(n * (1.0 + 2.0 * snrs)) * qfunc_inv(min_pd))
    pfa = energy_pfa_for_pd(min_pd, n, snrs)
    feasible = np.ones(snrs.shape, dtype=bool)
    return MjdDesign(thresholds, np.atleast_1d(pfa), min_pd.copy(), feasible)
