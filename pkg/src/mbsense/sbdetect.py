"""Single-band test statistics, threshold calibration, and decisions.

Detection formulas used for calibration:

* coherent (known waveform, real model): the statistic is Gaussian under
  both hypotheses, giving P_D = Q(Q^-1(P_FA) - sqrt(N * snr)).
* energy (complex model): the normalized energy has mean N / variance N
  under H0 and mean N(1+snr) / variance N(1+2*snr) under H1 in the CLT
  approximation, giving
  P_D = Q((Q^-1(P_FA) - sqrt(N) * snr) / sqrt(1 + 2*snr)).
  Exact quantiles of the statistic's Gamma sampling law are available
  behind the same interface (``method="exact"``) for cross-validation.

Covariance, cyclic, and CP feature detectors have no closed-form ROC
here; their thresholds are calibrated by empirical quantiles.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import scenario as _sc
from .scenario import H0, H1, PuSignalModel, ReceivedFrame

try:
    from scipy import special as _special
except ImportError:  # pragma: no cover - scipy is a declared dependency
    _special = None

__all__ = [
    "TestStatistic",
    "ThresholdPolicy",
    "DetectorSpec",
    "SingularCovarianceError",
    "qfunc",
    "qfunc_inv",
    "energy_stat",
    "coherent_stat",
    "covariance_eig_stat",
    "second_moment_stat",
    "cyclic_csd_stat",
    "lag_window_psd",
    "cp_autocorr_stat",
    "calibrate_threshold",
    "decide",
    "energy_pd",
    "coherent_pd",
]

_SQRT2 = math.sqrt(2.0)


class SingularCovarianceError(ArithmeticError):
    """Sample covariance is numerically singular; the eigenvalue-ratio
    statistic is undefined rather than silently clamped."""


# ---------------------------------------------------------------------------
# Gaussian tail function and inverse
# ---------------------------------------------------------------------------

def _erfc_fallback(x):
    return np.vectorize(math.erfc, otypes=[float])(x)


# Acklam's rational approximation of the standard normal quantile,
# polished below with one Halley step; accurate to ~1e-15 after polish.
_ACKLAM_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
             1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_ACKLAM_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
             6.680131188771972e+01, -1.328068155288572e+01)
_ACKLAM_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
             -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_ACKLAM_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
             3.754408661907416e+00)


def _norm_ppf_scalar(p):
    a, b, c, d = _ACKLAM_A, _ACKLAM_B, _ACKLAM_C, _ACKLAM_D
    p_low, p_high = 0.02425, 1 - 0.02425
    if p < p_low:
        q = math.sqrt(-2 * math.log(p))
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1)
    elif p <= p_high:
        q = p - 0.5
        r = q * q
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1)
    else:
        q = math.sqrt(-2 * math.log1p(-p))
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1)
    # Halley refinement against the exact CDF
    e = 0.5 * math.erfc(-x / _SQRT2) - p
    u = e * math.sqrt(2 * math.pi) * math.exp(x * x / 2)
    return x - u / (1 + x * u / 2)


def _qinv_fallback(p):
    return -np.vectorize(_norm_ppf_scalar, otypes=[float])(p)


def qfunc(x):
    """Standard Gaussian tail probability Q(x) = P(Z > x)."""
    x = np.asarray(x, float)
    if _special is not None:
        out = 0.5 * _special.erfc(x / _SQRT2)
    else:
        out = 0.5 * _erfc_fallback(x / _SQRT2)
    return out if out.ndim else float(out)


def qfunc_inv(p):
    """Inverse of :func:`qfunc` on (0, 1)."""
    p = np.asarray(p, float)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("qfunc_inv is defined on (0, 1)")
    if _special is not None:
        out = _SQRT2 * _special.erfcinv(2 * p)
    else:
        out = _qinv_fallback(p)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestStatistic:
    value: float
    detector_kind: str
    n_used: int


@dataclass(frozen=True)
class ThresholdPolicy:
    """How the decision threshold is obtained.

    mode is one of ``fixed`` (level is the threshold itself),
    ``target-pfa`` or ``target-pd`` (level is the target probability,
    strictly inside (0, 1)).
    """

    mode: str
    level: float

    def __post_init__(self):
        if self.mode not in ("fixed", "target-pfa", "target-pd"):
            raise ValueError(f"unknown policy mode {self.mode!r}")
        if self.mode != "fixed" and not 0.0 < self.level < 1.0:
            raise ValueError("target level must lie strictly inside (0, 1)")


@dataclass
class DetectorSpec:
    """A test statistic, its parameters, and its threshold policy."""

    kind: str
    policy: ThresholdPolicy | None = None
    template: np.ndarray | None = None
    cov_dim: int = 8
    nd: int = 64
    ncp: int = 16
    cyclic_alpha: float = 0.0
    cyclic_freq: float = 0.0
    max_lag: int = 8

    def __post_init__(self):
        if self.kind not in ("energy", "coherent", "covariance", "cp", "cyclic"):
            raise ValueError(f"unknown detector kind {self.kind!r}")


# ---------------------------------------------------------------------------
# Test statistics
# ---------------------------------------------------------------------------

def energy_stat(frame: ReceivedFrame) -> TestStatistic:
    """Normalized received energy ||y||^2 / noise_var."""
    if frame.noise_var <= 0:
        raise ValueError("noise_var must be positive")
    value = float(np.sum(np.abs(frame.samples) ** 2) / frame.noise_var)
    return TestStatistic(value, "energy", frame.n)


def coherent_stat(frame: ReceivedFrame, template) -> TestStatistic:
    """Matched-filter correlation Re[x^H y] against a known waveform."""
    template = np.asarray(template)
    if template.size != frame.n:
        raise ValueError("template length must equal the frame length")
    value = float(np.real(np.vdot(template, frame.samples)))
    return TestStatistic(value, "coherent", frame.n)


def covariance_eig_stat(frame: ReceivedFrame, cov_dim: int = 8) -> TestStatistic:
    """Max/min eigenvalue ratio of the L x L sample covariance.

    Needs no noise-variance knowledge; the ratio is scale invariant.
    Built from overlapping length-L windows of the frame.
    """
    samples = frame.samples
    n = samples.size
    if cov_dim < 1:
        raise ValueError("cov_dim must be >= 1")
    if n < 10 * cov_dim:
        raise ValueError("need at least 10 * cov_dim samples")
    windows = np.lib.stride_tricks.sliding_window_view(samples, cov_dim)
    cov = (windows.conj().T @ windows) / windows.shape[0]
    eig = np.linalg.eigvalsh(cov)
    if eig[-1] <= 0 or eig[0] <= eig[-1] * 1e-14:
        raise SingularCovarianceError("sample covariance is numerically singular")
    return TestStatistic(float(eig[-1] / eig[0]), "covariance", n)


def second_moment_stat(frame: ReceivedFrame, dim: int) -> np.ndarray:
    """Sample estimate of E[y y^H] at the given dimension.

    The frame is cut into consecutive non-overlapping length-``dim``
    blocks and their outer products averaged (zero-mean convention, so
    the divisor is the block count).
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    n_blocks = frame.n // dim
    if n_blocks < 1:
        raise ValueError("frame shorter than one block")
    blocks = frame.samples[:n_blocks * dim].reshape(n_blocks, dim)
    return (blocks.T @ blocks.conj()) / n_blocks


def _cyclic_lag_products(samples, alpha, max_lag):
    n = samples.size
    phase = np.exp(-2j * np.pi * alpha * np.arange(n))
    values = np.empty(2 * max_lag + 1, complex)
    for i, tau in enumerate(range(-max_lag, max_lag + 1)):
        if tau >= 0:
            prod = samples[tau:] * np.conj(samples[:n - tau]) * phase[:n - tau]
        else:
            prod = samples[:n + tau] * np.conj(samples[-tau:]) * phase[-tau:]
        values[i] = prod.sum() / n
    return values


def cyclic_csd_stat(frame: ReceivedFrame, alpha: float, freq: float,
                    max_lag: int = 8) -> float:
    """Cyclic spectral density magnitude estimate at (freq, alpha).

    Lag-windowed transform of the cyclic autocorrelation
    R^alpha(tau) = (1/N) sum_n y[n+tau] y*[n] e^{-j 2 pi alpha n},
    Bartlett-weighted over |tau| <= max_lag and Fourier-evaluated at
    ``freq``.  At alpha = 0 this is the lag-window PSD estimate.
    """
    if not abs(alpha) < 1:
        raise ValueError("alpha must satisfy |alpha| < 1")
    if not abs(freq) <= 0.5:
        raise ValueError("freq must satisfy |freq| <= 0.5")
    if max_lag < 0 or frame.n <= max_lag:
        raise ValueError("need 0 <= max_lag < N")
    taus = np.arange(-max_lag, max_lag + 1)
    weights = 1.0 - np.abs(taus) / (max_lag + 1.0)
    lags = _cyclic_lag_products(frame.samples, alpha, max_lag)
    return float(np.abs(np.sum(weights * lags * np.exp(-2j * np.pi * freq * taus))))


def lag_window_psd(frame: ReceivedFrame, freq: float, max_lag: int = 8) -> float:
    """Ordinary (alpha = 0) lag-window spectral estimate at ``freq``."""
    return cyclic_csd_stat(frame, 0.0, freq, max_lag)


def cp_autocorr_stat(frame: ReceivedFrame, nd: int, ncp: int) -> TestStatistic:
    """Normalized lag-nd autocorrelation accumulated over CP positions.

    Assumes block-aligned frames (prefix at the start of each
    nd+ncp-sample block).  The statistic lies in [0, 1] and tends to 1
    for clean cyclic-prefixed signals.
    """
    block = nd + ncp
    if frame.n < 2 * block:
        raise ValueError("need at least two OFDM blocks")
    n_blocks = frame.n // block
    y = frame.samples[:n_blocks * block].reshape(n_blocks, block)
    head = y[:, :ncp]
    tail = y[:, nd:nd + ncp]
    num = np.abs(np.sum(head * np.conj(tail)))
    den = 0.5 * np.sum(np.abs(head) ** 2 + np.abs(tail) ** 2)
    value = 0.0 if den == 0 else float(num / den)
    return TestStatistic(value, "cp", frame.n)


# ---------------------------------------------------------------------------
# Analytic ROC points
# ---------------------------------------------------------------------------

def coherent_pd(pfa, n, snr):
    """Detection probability of the coherent detector at the given P_FA."""
    return qfunc(qfunc_inv(pfa) - np.sqrt(n * snr))


def energy_pd(pfa, n, snr):
    """Detection probability of the energy detector (CLT form)."""
    return qfunc((qfunc_inv(pfa) - np.sqrt(n) * snr) / np.sqrt(1.0 + 2.0 * snr))


def energy_pfa_for_pd(beta, n, snr):
    """False-alarm probability when the threshold is set for P_D = beta."""
    return qfunc(qfunc_inv(beta) * np.sqrt(1.0 + 2.0 * snr) + np.sqrt(n) * snr)


# ---------------------------------------------------------------------------
# Threshold calibration
# ---------------------------------------------------------------------------

def _energy_threshold(policy, n, snr, method):
    if method == "exact":
        if _special is None:
            raise RuntimeError("exact quantiles require scipy")
        if policy.mode == "target-pfa":
            return float(_special.gammainccinv(n, policy.level))
        return float((1.0 + snr) * _special.gammainccinv(n, policy.level))
    if policy.mode == "target-pfa":
        return float(n + np.sqrt(n) * qfunc_inv(policy.level))
    return float(n * (1.0 + snr)
                 + np.sqrt(n * (1.0 + 2.0 * snr)) * qfunc_inv(policy.level))


def _coherent_threshold(policy, n, snr, noise_var, template):
    if template is not None:
        t_power = float(np.sum(np.abs(template) ** 2))
    else:
        t_power = n * snr * noise_var
    sd = np.sqrt(t_power * noise_var)
    if policy.mode == "target-pfa":
        return float(sd * qfunc_inv(policy.level))
    return float(t_power + sd * qfunc_inv(policy.level))


def _empirical_threshold(kind, policy, n, snr, noise_var, model, rng, mc_trials,
                         **params):
    if rng is None:
        raise ValueError("empirical calibration needs a generator")
    if model is None:
        model = PuSignalModel("gaussian")
    hyp = H0 if policy.mode == "target-pfa" else H1
    spec = DetectorSpec(kind, **params)
    stats = np.empty(mc_trials)
    for t in range(mc_trials):
        frame = _sc.generate_band_frame(model, hyp, snr, noise_var, n, rng)
        stats[t] = _statistic_value(spec, frame)
    # exceeded with probability `level` under the calibration hypothesis
    return float(np.quantile(stats, 1.0 - policy.level))


def _statistic_value(spec: DetectorSpec, frame: ReceivedFrame) -> float:
    if spec.kind == "energy":
        return energy_stat(frame).value
    if spec.kind == "coherent":
        template = spec.template
        if template is None:
            template = frame.pu_waveform
        if template is None:
            raise ValueError("coherent detection needs a template")
        return coherent_stat(frame, template).value
    if spec.kind == "covariance":
        return covariance_eig_stat(frame, spec.cov_dim).value
    if spec.kind == "cp":
        return cp_autocorr_stat(frame, spec.nd, spec.ncp).value
    return cyclic_csd_stat(frame, spec.cyclic_alpha, spec.cyclic_freq, spec.max_lag)


def calibrate_threshold(kind: str, policy: ThresholdPolicy, n: int,
                        snr: float = 0.0, noise_var: float = 1.0,
                        template=None, method: str = "clt",
                        model: PuSignalModel | None = None, rng=None,
                        mc_trials: int = 100_000, **params) -> float:
    """Threshold achieving the policy target for the given detector.

    Coherent and energy detectors use closed forms (Gaussian, and the
    CLT energy law or its exact Gamma quantile when ``method="exact"``);
    covariance/cp/cyclic detectors are calibrated by the empirical
    quantile of ``mc_trials`` simulated statistics.
    """
    if policy.mode == "fixed":
        return float(policy.level)
    if kind == "energy":
        return _energy_threshold(policy, n, snr, method)
    if kind == "coherent":
        return _coherent_threshold(policy, n, snr, noise_var, template)
    if kind in ("covariance", "cp", "cyclic"):
        return _empirical_threshold(kind, policy, n, snr, noise_var, model, rng,
                                    mc_trials, **params)
    raise ValueError(f"unknown detector kind {kind!r}")


def decide(stat, threshold: float) -> int:
    """H1 iff the statistic reaches the threshold (tie decides H1)."""
    value = stat.value if isinstance(stat, TestStatistic) else float(stat)
    return H1 if value >= threshold else H0
