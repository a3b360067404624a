"""Cooperative fusion of multiple SUs and multiband channel assignment.

Hard k-of-K voting, soft weighted-statistic combining, the 2-bit
softened-hard compromise, uniform/priority band assignments with their
Nyquist sampling cost, and fused multiband sensing over a partial
assignment.

The closed-form fused probabilities assume identical per-SU operating
points; heterogeneous users go through the exact Poisson-binomial tail
instead.  Both are written in plain arithmetic so Fraction inputs stay
exact.
"""

from dataclasses import dataclass
from math import comb

import numpy as np

from .mbdetect import MultibandDecision
from .scenario import H0, H1
from .sbdetect import _statistic_value

__all__ = [
    "FusionRule",
    "SamplingCost",
    "hard_combine",
    "binomial_tail",
    "poisson_binomial_tail",
    "fused_probabilities",
    "egc_weights",
    "mrc_weights",
    "soft_combine",
    "softened_hard_quantize",
    "softened_hard_combine",
    "assign_uniform",
    "assign_priority",
    "validate_assignment",
    "sampling_cost",
    "cooperative_multiband_sense",
]


@dataclass(frozen=True)
class FusionRule:
    """How cooperating SUs' reports are fused for one band.

    kind is ``hard`` (k-of-K vote on 1-bit decisions), ``soft``
    (weighted statistic sum against ``threshold``), or
    ``softened-hard`` (2-bit quantized statistics, region-score sum).
    """

    kind: str
    vote_k: int | None = None
    weights: tuple | None = None
    threshold: float | None = None
    spread: float | None = None

    def __post_init__(self):
        if self.kind not in ("hard", "soft", "softened-hard"):
            raise ValueError(f"unknown fusion kind {self.kind!r}")
        if self.kind == "hard":
            if self.vote_k is None or self.vote_k < 1:
                raise ValueError("hard fusion needs vote_k >= 1")
        if self.kind == "soft":
            if self.weights is None or self.threshold is None:
                raise ValueError("soft fusion needs weights and a threshold")
            w = np.asarray(self.weights, float)
            if np.any(w < 0) or not np.any(w > 0):
                raise ValueError("weights must be non-negative, not all zero")
        if self.kind == "softened-hard":
            if self.spread is None or self.spread <= 0:
                raise ValueError("softened-hard fusion needs spread > 0")


def hard_combine(decisions, vote_k: int) -> int:
    """k-of-K vote: H1 iff at least vote_k SUs report occupied.

    vote_k = 1 is the OR rule, vote_k = K the AND rule, and
    vote_k = ceil(K/2) the majority rule.
    """
    votes = [int(d) for d in decisions]
    n_users = len(votes)
    if not 1 <= vote_k <= n_users:
        raise ValueError("need 1 <= vote_k <= number of users")
    if any(v not in (0, 1) for v in votes):
        raise ValueError("decisions must be 0/1")
    return H1 if sum(votes) >= vote_k else H0


def binomial_tail(p, n_users: int, vote_k: int):
    """P(at least vote_k of n_users i.i.d. Bernoulli(p) fire).

    Exact for Fraction inputs.
    """
    if not 1 <= vote_k <= n_users:
        raise ValueError("need 1 <= vote_k <= n_users")
    return sum(comb(n_users, q) * p ** q * (1 - p) ** (n_users - q)
               for q in range(vote_k, n_users + 1))


def poisson_binomial_tail(per_user_p, vote_k: int):
    """P(at least vote_k independent, non-identical Bernoullis fire).

    Dynamic program over users; exact for Fraction inputs.  This is the
    heterogeneous-SU oracle backing the identical-SU closed form.
    """
    probs = list(per_user_p)
    if not 1 <= vote_k <= len(probs):
        raise ValueError("need 1 <= vote_k <= number of users")
    dist = [1]
    for p in probs:
        nxt = [dist[0] * (1 - p)]
        for count in range(1, len(dist)):
            nxt.append(dist[count] * (1 - p) + dist[count - 1] * p)
        nxt.append(dist[-1] * p)
        dist = nxt
    return sum(dist[vote_k:])


def fused_probabilities(p_d, p_fa, n_users: int, vote_k: int):
    """Overall (Q_D, Q_FA) of a k-of-K rule with identical SUs."""
    return (binomial_tail(p_d, n_users, vote_k),
            binomial_tail(p_fa, n_users, vote_k))


def egc_weights(n_users: int) -> np.ndarray:
    """Equal gain combining: unit weight per SU."""
    return np.ones(n_users)


def mrc_weights(snrs) -> np.ndarray:
    """Maximal ratio combining: weights proportional to per-SU SNR,
    normalized to sum to 1."""
    snrs = np.asarray(snrs, float)
    if np.any(snrs < 0) or not np.any(snrs > 0):
        raise ValueError("snrs must be non-negative, not all zero")
    return snrs / snrs.sum()


def soft_combine(statistics, weights) -> float:
    """Weighted sum of the SUs' raw test statistics."""
    statistics = np.asarray(statistics, float)
    weights = np.asarray(weights, float)
    if statistics.shape != weights.shape:
        raise ValueError("statistics and weights must share length")
    if np.any(weights < 0) or not np.any(weights > 0):
        raise ValueError("weights must be non-negative, not all zero")
    return float(np.sum(weights * statistics))


def softened_hard_quantize(value: float, threshold: float, spread: float) -> int:
    """Quantize one statistic into a 2-bit region score.

    Regions (strong-0, weak-0, weak-1, strong-1) -> scores (0, 1, 2, 3)
    with cut points threshold - spread, threshold, threshold + spread;
    ties fall to the upper region, consistent with the >= decision rule.
    """
    if spread <= 0:
        raise ValueError("spread must be positive")
    if value >= threshold + spread:
        return 3
    if value >= threshold:
        return 2
    if value >= threshold - spread:
        return 1
    return 0


def softened_hard_combine(symbols) -> int:
    """Fuse 2-bit region scores: H1 iff their sum reaches 1.5 * K
    (the midpoint of the score range; ties decide H1)."""
    scores = [int(s) for s in symbols]
    if any(s not in (0, 1, 2, 3) for s in scores):
        raise ValueError("symbols must be 2-bit region scores")
    return H1 if sum(scores) >= 1.5 * len(scores) else H0


# ---------------------------------------------------------------------------
# Band assignment and sampling cost
# ---------------------------------------------------------------------------

def _fill_columns(n_users: int, per_band: np.ndarray) -> np.ndarray:
    """Round-robin assignment: walk SUs cyclically, giving band m its
    per_band[m] distinct sensors; keeps per-SU loads within one."""
    matrix = np.zeros((n_users, per_band.size), dtype=int)
    cursor = 0
    for m, d in enumerate(per_band):
        for _ in range(int(d)):
            matrix[cursor % n_users, m] = 1
            cursor += 1
    return matrix


def assign_uniform(n_users: int, n_bands: int, diversity: int) -> np.ndarray:
    """Assignment where every band is sensed by exactly ``diversity`` SUs."""
    if n_users < 1 or n_bands < 1:
        raise ValueError("need at least one SU and one band")
    if not 1 <= diversity <= n_users:
        raise ValueError("diversity must lie in [1, n_users]")
    return _fill_columns(n_users, np.full(n_bands, diversity))


def assign_priority(n_users: int, n_bands: int, priorities,
                    total_budget: int) -> np.ndarray:
    """Non-uniform assignment: per-band diversity proportional to priority.

    Largest-remainder apportionment of ``total_budget`` sensor slots,
    with every band floored at one sensor (coverage) and capped at
    ``n_users``.
    """
    priorities = np.asarray(priorities, float)
    if priorities.size != n_bands or np.any(priorities <= 0):
        raise ValueError("need one positive priority per band")
    if total_budget < n_bands:
        raise ValueError("budget below full-coverage minimum")
    if total_budget > n_users * n_bands:
        raise ValueError("budget exceeds n_users * n_bands")
    quotas = total_budget * priorities / priorities.sum()
    per_band = np.floor(quotas).astype(int)
    remainder = total_budget - per_band.sum()
    order = np.argsort(-(quotas - per_band), kind="stable")
    for i in range(remainder):
        per_band[order[i]] += 1
    # enforce 1 <= d_m <= n_users, moving slots from the fullest bands
    for m in range(n_bands):
        while per_band[m] < 1:
            per_band[np.argmax(per_band)] -= 1
            per_band[m] += 1
        while per_band[m] > n_users:
            per_band[np.argmin(per_band)] += 1
            per_band[m] -= 1
    return _fill_columns(n_users, per_band)


def validate_assignment(matrix) -> np.ndarray:
    """Check full spectrum coverage: every band sensed by >= 1 SU."""
    matrix = np.asarray(matrix, int)
    if matrix.ndim != 2:
        raise ValueError("assignment must be a K x M matrix")
    if np.any((matrix != 0) & (matrix != 1)):
        raise ValueError("assignment entries must be 0/1")
    if np.any(matrix.sum(axis=0) < 1):
        raise ValueError("every band must be covered by at least one SU")
    return matrix


@dataclass(frozen=True)
class SamplingCost:
    per_user_hz: np.ndarray
    max_hz: float


def sampling_cost(assignment, band_bandwidth: float) -> SamplingCost:
    """Nyquist sampling cost implied by an assignment.

    Each SU must sample at twice its total assigned bandwidth; the
    design cost is the maximum over SUs.
    """
    matrix = validate_assignment(assignment)
    if band_bandwidth <= 0:
        raise ValueError("band_bandwidth must be positive")
    per_user = 2.0 * band_bandwidth * matrix.sum(axis=1)
    return SamplingCost(per_user, float(per_user.max()))


# ---------------------------------------------------------------------------
# Cooperative multiband sensing
# ---------------------------------------------------------------------------

def cooperative_multiband_sense(frames, assignment, detector,
                                thresholds, rule: FusionRule) -> MultibandDecision:
    """Fuse per-band decisions from SUs sensing assigned subsets.

    ``frames[i][m]`` holds SU i's frame for band m (only assigned
    entries are touched).  ``detector`` is one spec or a per-SU list;
    ``thresholds`` broadcasts over bands.  Hard rules clip the vote
    count to each band's covering SU count.
    """
    matrix = validate_assignment(assignment)
    n_users, n_bands = matrix.shape
    thresholds = np.broadcast_to(np.asarray(thresholds, float), (n_bands,))
    specs = detector if isinstance(detector, (list, tuple)) else [detector] * n_users
    if len(specs) != n_users:
        raise ValueError("need one detector spec per SU")
    decisions = np.empty(n_bands, dtype=int)
    fused_stats = np.empty(n_bands)
    for m in range(n_bands):
        users = np.nonzero(matrix[:, m])[0]
        stats = np.array([_statistic_value(specs[i], frames[i][m]) for i in users])
        if rule.kind == "hard":
            votes = (stats >= thresholds[m]).astype(int)
            k = min(rule.vote_k, users.size)
            decisions[m] = hard_combine(votes, k)
            fused_stats[m] = votes.sum()
        elif rule.kind == "soft":
            weights = np.asarray(rule.weights, float)[users]
            fused_stats[m] = soft_combine(stats, weights)
            decisions[m] = H1 if fused_stats[m] >= rule.threshold else H0
        else:
            symbols = [softened_hard_quantize(s, thresholds[m], rule.spread)
                       for s in stats]
            decisions[m] = softened_hard_combine(symbols)
            fused_stats[m] = sum(symbols)
    return MultibandDecision(decisions, thresholds.copy(), fused_stats)
