"""Synthetic primary-user signals, noise, and wideband scenarios.

Ground truth is always known: every generated frame records the true
hypothesis, and wideband draws return the per-band occupancy alongside
the samples.

Signal-domain convention: the gaussian and ofdm-cp signal kinds live in
complex baseband with circularly-symmetric noise of *total* variance
``noise_var`` (so the normalized energy statistic has mean N and variance
N under H0, the law behind the CLT detection formulas).  The
known-waveform and bpsk kinds are real-valued models: samples are stored
in the same complex arrays but carry real noise of variance ``noise_var``
and zero imaginary part, matching the Gaussian mean-shift analysis used
for the coherent detector.
"""

from dataclasses import dataclass

import numpy as np

from .rng import substream

__all__ = [
    "H0",
    "H1",
    "UNDECIDED",
    "PuSignalModel",
    "WidebandScenario",
    "ReceivedFrame",
    "generate_band_frame",
    "generate_wideband",
    "synthesize_wideband_psd",
]

H0 = 0
H1 = 1
UNDECIDED = -1

_KINDS = ("gaussian", "known-waveform", "ofdm-cp", "bpsk")


@dataclass(frozen=True)
class PuSignalModel:
    """Primary-user waveform family and its parameters.

    kind
        One of ``gaussian``, ``known-waveform``, ``ofdm-cp``, ``bpsk``.
    nd, ncp
        OFDM useful-symbol and cyclic-prefix lengths (samples).
    symbol_period
        BPSK samples per symbol (rectangular pulse).
    carrier_offset
        BPSK carrier offset in cycles/sample; 0 keeps the signal real.
    template
        Unit-power waveform for ``known-waveform``; generated per frame
        when omitted.
    """

    kind: str = "gaussian"
    nd: int = 64
    ncp: int = 16
    symbol_period: int = 8
    carrier_offset: float = 0.0
    template: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown signal kind {self.kind!r}")
        if self.kind == "ofdm-cp":
            if self.ncp < 1:
                raise ValueError("cyclic prefix length must be >= 1")
            if self.nd < self.ncp:
                raise ValueError("useful-symbol length must be >= prefix length")
        if self.kind == "bpsk" and self.symbol_period < 2:
            raise ValueError("bpsk symbol period must be >= 2 samples")

    @property
    def is_real(self) -> bool:
        """True when the model's samples (and noise) are real-valued."""
        if self.kind == "known-waveform":
            return self.template is None or not np.iscomplexobj(self.template)
        return self.kind == "bpsk" and self.carrier_offset == 0.0


@dataclass(frozen=True)
class WidebandScenario:
    """M-subchannel ground-truth generator parameters.

    ``idle_prior`` and ``snr`` broadcast from scalars to per-band arrays.
    ``snr`` is the linear signal-to-noise power ratio per band.
    """

    num_bands: int
    band_bandwidth: float
    idle_prior: np.ndarray
    snr: np.ndarray
    sample_rate: float
    seed: int
    noise_var: float = 1.0

    def __post_init__(self):
        if self.num_bands < 1:
            raise ValueError("num_bands must be >= 1")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.noise_var <= 0:
            raise ValueError("noise_var must be positive")
        prior = np.broadcast_to(np.asarray(self.idle_prior, float), (self.num_bands,)).copy()
        snr = np.broadcast_to(np.asarray(self.snr, float), (self.num_bands,)).copy()
        if np.any((prior < 0) | (prior > 1)):
            raise ValueError("idle priors must lie in [0, 1]")
        if np.any(snr < 0):
            raise ValueError("snr must be non-negative")
        object.__setattr__(self, "idle_prior", prior)
        object.__setattr__(self, "snr", snr)


@dataclass
class ReceivedFrame:
    """One sensed frame: N samples plus the truth that produced them."""

    samples: np.ndarray
    truth: int
    noise_var: float
    pu_waveform: np.ndarray | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, complex)
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise ValueError("samples must be a non-empty 1-D sequence")
        if self.noise_var <= 0:
            raise ValueError("noise_var must be positive")
        if self.truth not in (H0, H1):
            raise ValueError("truth must be H0 or H1")

    @property
    def n(self) -> int:
        return self.samples.size


def _pu_waveform(model: PuSignalModel, snr, noise_var, n, rng) -> np.ndarray:
    """Unit-convention waveform with mean power snr * noise_var."""
    power = snr * noise_var
    if model.kind == "gaussian":
        scale = np.sqrt(power / 2.0)
        return scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    if model.kind == "known-waveform":
        if model.template is not None:
            t = np.asarray(model.template, complex)
            if t.size != n:
                raise ValueError("template length must equal the frame length")
            rms = np.sqrt(np.mean(np.abs(t) ** 2))
            if rms == 0:
                raise ValueError("template must not be all zero")
            return np.sqrt(power) * t / rms
        return np.sqrt(power) * rng.choice([-1.0, 1.0], size=n).astype(complex)
    if model.kind == "ofdm-cp":
        blocks = -(-n // (model.nd + model.ncp))
        useful = (rng.standard_normal((blocks, model.nd))
                  + 1j * rng.standard_normal((blocks, model.nd))) / np.sqrt(2.0)
        with_cp = np.concatenate([useful[:, model.nd - model.ncp:], useful], axis=1)
        return np.sqrt(power) * with_cp.reshape(-1)[:n]
    # bpsk
    period = model.symbol_period
    symbols = rng.choice([-1.0, 1.0], size=-(-n // period))
    wave = np.repeat(symbols, period)[:n].astype(complex)
    if model.carrier_offset != 0.0:
        wave = wave * np.exp(2j * np.pi * model.carrier_offset * np.arange(n))
    return np.sqrt(power) * wave


def _noise(real_domain, noise_var, n, rng) -> np.ndarray:
    if real_domain:
        return np.sqrt(noise_var) * rng.standard_normal(n) + 0j
    scale = np.sqrt(noise_var / 2.0)
    return scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def generate_band_frame(model: PuSignalModel, hypothesis: int, snr: float,
                        noise_var: float, n: int, rng) -> ReceivedFrame:
    """Draw one frame of ``n`` samples under the given hypothesis.

    Under H0 the frame is pure noise; under H1 a waveform of the model's
    kind with power ``snr * noise_var`` is added.  The true waveform is
    recorded on the frame so matched detectors can use it as a template.
    """
    if n < 1:
        raise ValueError("sample count must be >= 1")
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    if snr < 0:
        raise ValueError("snr must be non-negative")
    if hypothesis not in (H0, H1):
        raise ValueError("hypothesis must be H0 or H1")
    wave = None
    if hypothesis == H1:
        wave = _pu_waveform(model, snr, noise_var, n, rng)
    noise = _noise(model.is_real, noise_var, n, rng)
    samples = noise if wave is None else wave + noise
    return ReceivedFrame(samples=samples, truth=hypothesis,
                         noise_var=noise_var, pu_waveform=wave)


def generate_wideband(scenario: WidebandScenario, n_per_band: int,
                      model: PuSignalModel | None = None, trial: int = 0):
    """Draw per-band frames for one wideband sensing trial.

    Per-band occupancy is Bernoulli(1 - idle_prior[m]), independent
    across bands.  Each band consumes its own seed substream keyed by
    (scenario.seed, trial, band), so results never depend on evaluation
    order.  Returns ``(frames, truths)``.
    """
    if model is None:
        model = PuSignalModel("gaussian")
    frames = []
    truths = np.empty(scenario.num_bands, dtype=int)
    for m in range(scenario.num_bands):
        rng = substream(scenario.seed, trial, m)
        occupied = rng.random() >= scenario.idle_prior[m]
        truths[m] = H1 if occupied else H0
        frames.append(generate_band_frame(model, int(truths[m]), scenario.snr[m],
                                          scenario.noise_var, n_per_band, rng))
    return frames, truths


def synthesize_wideband_psd(edges, levels, nfft: int, noise_floor: float = 0.0,
                            rng=None):
    """Piecewise-constant PSD with known edge positions.

    ``edges`` are strictly increasing interior bin positions in
    (0, nfft); ``levels`` has one entry per band (len(edges) + 1).  A
    positive ``noise_floor`` adds an exponential perturbation with that
    mean, mimicking periodogram noise.  Returns ``(psd, edges)``.
    """
    edges = np.asarray(sorted(int(e) for e in edges), dtype=int)
    levels = np.asarray(levels, float)
    if edges.size and (edges[0] <= 0 or edges[-1] >= nfft):
        raise ValueError("edges must lie strictly inside (0, nfft)")
    if edges.size and np.any(np.diff(edges) <= 0):
        raise ValueError("edges must be strictly increasing")
    if levels.size != edges.size + 1:
        raise ValueError("need exactly len(edges) + 1 levels")
    if np.any(levels < 0):
        raise ValueError("levels must be non-negative")
    if noise_floor < 0:
        raise ValueError("noise_floor must be non-negative")
    psd = np.empty(nfft, float)
    bounds = np.concatenate([[0], edges, [nfft]])
    for b, level in enumerate(levels):
        psd[bounds[b]:bounds[b + 1]] = level
    if noise_floor > 0:
        if rng is None:
            raise ValueError("a generator is required when noise_floor > 0")
        psd = psd + noise_floor * rng.exponential(1.0, nfft)
    return psd, edges
