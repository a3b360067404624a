"""Wideband spectrum estimation without known band boundaries.

Two families: wavelet edge detection on the PSD (continuous wavelet
transform with a Gaussian smoothing kernel, modulus maxima, multiscale
product/sum, and thresholded edge extraction) and compressive sensing
(sub-Nyquist linear measurements with orthogonal matching pursuit
recovery).
"""

from dataclasses import dataclass

import numpy as np

from .scenario import H0, H1

__all__ = [
    "WaveletConfig",
    "CsProblem",
    "RecoveryError",
    "OmpResult",
    "gaussian_kernel",
    "cwt",
    "spectral_derivative",
    "local_maxima",
    "wmm_edges",
    "wmp",
    "wms",
    "default_edge_threshold",
    "threshold_edges",
    "estimate_bands",
    "dft_basis",
    "gaussian_measurement",
    "bernoulli_measurement",
    "aic_measurement",
    "mass_measurement",
    "cs_measure",
    "omp_recover",
    "cs_occupancy",
]


class RecoveryError(ArithmeticError):
    """Sparse recovery hit a rank-deficient selected subdictionary."""


@dataclass(frozen=True)
class WaveletConfig:
    """Edge-detection settings: dyadic scales 2^1 .. 2^num_scales, an
    edge threshold applied after mean-PSD normalization (None = use the
    data-driven default), and the FFT size of the PSD grid."""

    num_scales: int = 3
    edge_threshold: float | None = None
    nfft: int = 1024

    def __post_init__(self):
        if self.num_scales < 1:
            raise ValueError("num_scales must be >= 1")
        if self.edge_threshold is not None and self.edge_threshold < 0:
            raise ValueError("edge_threshold must be >= 0")
        if self.nfft < 2 or self.nfft & (self.nfft - 1):
            raise ValueError("nfft must be a power of two")

    @property
    def scales(self):
        return [2.0 ** j for j in range(1, self.num_scales + 1)]


# ---------------------------------------------------------------------------
# Wavelet transform machinery
# ---------------------------------------------------------------------------

def gaussian_kernel(scale: float) -> np.ndarray:
    """Dilated unit-Gaussian smoothing kernel, truncated at +-6*scale bins.

    psi_s(f) = (1/s) * psi(f/s) sampled on the integer bin grid; no
    renormalization, so the taps sum to just under 1.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    half = int(np.ceil(6.0 * scale))
    u = np.arange(-half, half + 1) / scale
    return np.exp(-0.5 * u * u) / (np.sqrt(2.0 * np.pi) * scale)


def cwt(psd, scale: float) -> np.ndarray:
    """Circular convolution of the PSD with the dilated smoothing kernel.

    Direct (non-FFT) convolution so that constant PSD regions map to
    bitwise-constant output, which keeps derivative dust at exactly zero
    away from edges.
    """
    psd = np.asarray(psd, float)
    kernel = gaussian_kernel(scale)
    half = kernel.size // 2
    if psd.size < kernel.size:
        raise ValueError("PSD shorter than the kernel support")
    extended = np.concatenate([psd[-half:], psd, psd[:half]])
    return np.convolve(extended, kernel, mode="valid")


def spectral_derivative(values) -> np.ndarray:
    """Centered finite difference on the circular bin grid."""
    values = np.asarray(values, float)
    return 0.5 * (np.roll(values, -1) - np.roll(values, 1))


def local_maxima(values, guard: int = 0) -> np.ndarray:
    """Plateau-merged local maxima of a non-negative vector.

    A run of equal values flanked by strictly smaller neighbors counts
    as one maximum at the run's center.  ``guard`` bins at each end are
    excluded (circular-convolution artifact zone).
    """
    v = np.asarray(values, float)
    n = v.size
    out = []
    i = 1
    while i < n - 1:
        if v[i] > v[i - 1]:
            j = i
            while j < n - 1 and v[j + 1] == v[i]:
                j += 1
            if j < n - 1 and v[j + 1] < v[i]:
                out.append((i + j) // 2)
            i = j + 1
        else:
            i += 1
    idx = np.array(out, dtype=int)
    if guard > 0 and idx.size:
        idx = idx[(idx >= guard) & (idx < n - guard)]
    return idx


def _guard_bins(config: WaveletConfig) -> int:
    return int(np.ceil(6.0 * config.scales[-1])) + 1


def wmm_edges(psd, config: WaveletConfig) -> np.ndarray:
    """Wavelet modulus maxima: peaks of |d/df W_s(f)| at the largest scale.

    Unthresholded, so impulsive contamination shows up as false edges;
    that behavior motivates the multiscale product and the threshold.
    """
    deriv = spectral_derivative(cwt(psd, config.scales[-1]))
    return local_maxima(np.abs(deriv), guard=_guard_bins(config))


def wmp(psd, config: WaveletConfig) -> np.ndarray:
    """Wavelet multiscale product of the first-derivative CWTs."""
    product = None
    for scale in config.scales:
        deriv = spectral_derivative(cwt(psd, scale))
        product = deriv if product is None else product * deriv
    return product


def wms(psd, config: WaveletConfig) -> np.ndarray:
    """Wavelet multiscale sum of the first-derivative CWTs."""
    total = None
    for scale in config.scales:
        deriv = spectral_derivative(cwt(psd, scale))
        total = deriv if total is None else total + deriv
    return total


def default_edge_threshold(psd, config: WaveletConfig,
                           combine: str = "product") -> float:
    """Data-driven edge threshold from per-scale noise levels.

    Each scale contributes 3 x the median derivative magnitude (a robust
    noise-level estimate); the contributions multiply for the multiscale
    product and add for the multiscale sum, then the mean-PSD
    normalization is applied.  On noiseless piecewise-constant spectra
    the medians are exactly zero (constant regions convolve to constant
    output), so clean scenes keep every true edge.
    """
    psd = np.asarray(psd, float)
    levels = [3.0 * np.median(np.abs(spectral_derivative(cwt(psd, s))))
              for s in config.scales]
    if combine == "product":
        total = float(np.prod(levels))
    elif combine == "sum":
        total = float(np.sum(levels))
    else:
        raise ValueError("combine must be product or sum")
    return total / float(psd.mean())


def threshold_edges(multiscale, delta, psd, guard: int = 0,
                    config: WaveletConfig | None = None,
                    combine: str = "product") -> np.ndarray:
    """Local maxima of the normalized multiscale vector at least delta.

    ``delta=None`` applies :func:`default_edge_threshold` (which needs
    the wavelet config that produced the vector).  Returns sorted bin
    indices.
    """
    psd = np.asarray(psd, float)
    norm = np.abs(np.asarray(multiscale, float)) / psd.mean()
    if delta is None:
        if config is None:
            raise ValueError("the default threshold rule needs the wavelet config")
        delta = default_edge_threshold(psd, config, combine)
    if delta < 0:
        raise ValueError("delta must be >= 0")
    candidates = local_maxima(norm, guard=guard)
    kept = candidates[norm[candidates] >= delta]
    return np.sort(kept)


def estimate_bands(edges, nfft: int):
    """Partition [0, nfft) at the detected edges.

    ``k`` edges produce ``k + 1`` bands as half-open (start, stop) bin
    ranges.  An edge at bin 0 is rejected as a degenerate boundary at
    the origin.
    """
    edges = [int(e) for e in edges]
    if any(e <= 0 or e >= nfft for e in edges):
        raise ValueError("edges must lie strictly inside (0, nfft)")
    if sorted(set(edges)) != edges:
        raise ValueError("edges must be sorted and unique")
    bounds = [0] + edges + [nfft]
    return [(bounds[i], bounds[i + 1]) for i in range(len(bounds) - 1)]


# ---------------------------------------------------------------------------
# Compressive sensing
# ---------------------------------------------------------------------------

@dataclass
class CsProblem:
    """Sparse-recovery problem z = Phi Psi s with O < N measurements."""

    basis: np.ndarray
    measurement_matrix: np.ndarray
    sparsity: int
    measurements: np.ndarray | None = None
    coefficients: np.ndarray | None = None

    def __post_init__(self):
        n_meas, n = self.measurement_matrix.shape
        if not n_meas < n:
            raise ValueError("need fewer measurements than signal samples")
        if self.basis.shape != (n, n):
            raise ValueError("basis must be N x N")
        gram = self.basis.conj().T @ self.basis
        if np.max(np.abs(gram - np.eye(n))) > 1e-10:
            raise ValueError("basis columns must be orthonormal to 1e-10")
        if self.sparsity < 0:
            raise ValueError("sparsity must be >= 0")


def dft_basis(n: int) -> np.ndarray:
    """Unitary frequency-synthesis basis: column k is e^{j2pi kn/N}/sqrt(N)."""
    grid = np.arange(n)
    return np.exp(2j * np.pi * np.outer(grid, grid) / n) / np.sqrt(n)


def gaussian_measurement(n_meas: int, n: int, rng) -> np.ndarray:
    """Dense i.i.d. Gaussian measurement matrix scaled by 1/sqrt(O)."""
    return rng.standard_normal((n_meas, n)) / np.sqrt(n_meas)


def bernoulli_measurement(n_meas: int, n: int, rng) -> np.ndarray:
    """Random +-1 measurement matrix scaled by 1/sqrt(O)."""
    return rng.choice([-1.0, 1.0], size=(n_meas, n)) / np.sqrt(n_meas)


def aic_measurement(n: int, block: int, rng) -> np.ndarray:
    """Discrete analog-to-information converter: PN modulation followed
    by block averaging (one output per ``block`` input samples)."""
    if n % block:
        raise ValueError("block must divide the signal length")
    pn = rng.choice([-1.0, 1.0], size=n)
    rows = n // block
    phi = np.zeros((rows, n))
    for r in range(rows):
        phi[r, r * block:(r + 1) * block] = pn[r * block:(r + 1) * block] / block
    return phi


def mass_measurement(n: int, decimations) -> np.ndarray:
    """Multi-rate sub-Nyquist sampler: stacked selector rows, one branch
    per decimation rate, each keeping every ``rate``-th sample."""
    rows = []
    for rate in decimations:
        rate = int(rate)
        if rate < 2:
            raise ValueError("decimation rates must be >= 2")
        for start in (0,):
            for idx in range(start, n, rate):
                row = np.zeros(n)
                row[idx] = 1.0
                rows.append(row)
    phi = np.array(rows)
    if phi.shape[0] >= n:
        raise ValueError("decimation rates too dense: O >= N")
    return phi


def cs_measure(signal, phi) -> np.ndarray:
    """Apply the measurement matrix: z = Phi y."""
    signal = np.asarray(signal)
    phi = np.asarray(phi)
    if phi.ndim != 2 or phi.shape[1] != signal.size:
        raise ValueError("measurement matrix must be O x len(y)")
    return phi @ signal


@dataclass
class OmpResult:
    coefficients: np.ndarray
    support: np.ndarray
    residual_norm: float
    n_iterations: int


def omp_recover(measurements, phi, basis=None, max_atoms: int = 0,
                residual_tol: float = 0.0) -> OmpResult:
    """Orthogonal matching pursuit on the effective dictionary Phi Psi.

    Greedy atom selection by maximum residual correlation with a full
    least-squares refit each iteration; stops after ``max_atoms``
    selections or when the residual norm drops to
    ``residual_tol * ||z||``.
    """
    z = np.asarray(measurements)
    phi = np.asarray(phi)
    dictionary = phi if basis is None else phi @ np.asarray(basis)
    n_meas, n = dictionary.shape
    if max_atoms > n_meas:
        raise ValueError("cannot select more atoms than measurements")
    norms = np.linalg.norm(dictionary, axis=0)
    norms[norms == 0] = 1.0
    coeffs = np.zeros(n, dtype=complex)
    support: list[int] = []
    residual = z.astype(complex).copy()
    z_norm = np.linalg.norm(z)
    solution = np.zeros(0, dtype=complex)
    iterations = 0
    while len(support) < max_atoms and np.linalg.norm(residual) > residual_tol * z_norm:
        scores = np.abs(dictionary.conj().T @ residual) / norms
        scores[support] = -1.0
        atom = int(np.argmax(scores))
        support.append(atom)
        sub = dictionary[:, support]
        solution, _, rank, _ = np.linalg.lstsq(sub, z, rcond=None)
        if rank < len(support):
            raise RecoveryError("selected subdictionary is rank deficient")
        residual = z - sub @ solution
        iterations += 1
    coeffs[support] = solution
    return OmpResult(coeffs, np.array(support, dtype=int),
                     float(np.linalg.norm(residual)), iterations)


def cs_occupancy(coefficients, band_map, power_threshold: float) -> np.ndarray:
    """Per-band occupancy from recovered frequency-basis coefficients.

    A band is declared occupied iff its reconstructed in-band power
    (sum of |s|^2 over the band's bins) reaches the threshold.
    """
    coefficients = np.asarray(coefficients)
    decisions = []
    for a, b in band_map:
        power = float(np.sum(np.abs(coefficients[a:b]) ** 2))
        decisions.append(H1 if power >= power_threshold else H0)
    return np.array(decisions, dtype=int)
