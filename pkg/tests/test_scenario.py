import numpy as np
import pytest

from mbsense.rng import substream
from mbsense.scenario import (H0, H1, PuSignalModel, ReceivedFrame,
                              WidebandScenario, generate_band_frame,
                              generate_wideband, synthesize_wideband_psd)


def test_h0_gaussian_noise_variance():
    rng = substream(101, "h0-var")
    frame = generate_band_frame(PuSignalModel("gaussian"), H0, 0.1, 1.0, 10**5, rng)
    assert frame.truth == H0
    var = np.mean(np.abs(frame.samples) ** 2)
    assert 0.98 <= var <= 1.02


def test_h1_gaussian_variance_additivity():
    # variance under H1 is (1 + snr) * noise_var; averaged over 100 seeds
    total = 0.0
    for seed in range(100):
        rng = substream(202, "h1-var", seed)
        frame = generate_band_frame(PuSignalModel("gaussian"), H1, 0.1, 1.0, 10**5, rng)
        total += np.mean(np.abs(frame.samples) ** 2)
    assert 1.08 <= total / 100 <= 1.12


def test_ofdm_cp_lag_autocorrelation():
    # brute-force autocorrelation: the CP copy makes lag nd stand out
    model = PuSignalModel("ofdm-cp", nd=64, ncp=16)
    ratios = []
    for seed in range(100):
        rng = substream(303, "ofdm", seed)
        frame = generate_band_frame(model, H1, 1.0, 1.0, 4000, rng)
        y = frame.samples

        def autocorr(lag):
            return abs(np.sum(y[lag:] * np.conj(y[:-lag])))

        ratios.append(autocorr(64) / max(autocorr(63), 1e-30))
    assert np.mean(ratios) >= 5.0


def test_ofdm_validation():
    with pytest.raises(ValueError):
        PuSignalModel("ofdm-cp", nd=8, ncp=16)
    with pytest.raises(ValueError):
        PuSignalModel("bpsk", symbol_period=1)
    with pytest.raises(ValueError):
        PuSignalModel("chirp")


def test_frame_parameter_validation():
    rng = substream(1)
    model = PuSignalModel("gaussian")
    with pytest.raises(ValueError):
        generate_band_frame(model, H1, 0.1, 1.0, 0, rng)
    with pytest.raises(ValueError):
        generate_band_frame(model, H1, 0.1, -1.0, 10, rng)
    with pytest.raises(ValueError):
        generate_band_frame(model, H1, -0.1, 1.0, 10, rng)
    with pytest.raises(ValueError):
        generate_band_frame(model, 2, 0.1, 1.0, 10, rng)


def _scenario(prior, num_bands=10, seed=42):
    return WidebandScenario(num_bands=num_bands, band_bandwidth=6e6,
                            idle_prior=prior, snr=0.1, sample_rate=1e6,
                            seed=seed)


def test_wideband_all_idle_and_all_busy():
    frames, truths = generate_wideband(_scenario(1.0), 4)
    assert np.all(truths == H0)
    frames, truths = generate_wideband(_scenario(0.0), 4)
    assert np.all(truths == H1)
    assert all(isinstance(f, ReceivedFrame) for f in frames)


def test_wideband_bernoulli_fraction():
    scen = _scenario(0.7, num_bands=4, seed=777)
    counts = np.zeros(4)
    draws = 10**5
    for trial in range(draws):
        _, truths = generate_wideband(scen, 1, trial=trial)
        counts += truths == H0
    frac = counts / draws
    assert np.all(frac >= 0.695) and np.all(frac <= 0.705)


def test_wideband_determinism_bit_for_bit():
    scen = _scenario(0.5, seed=2024)
    frames_a, truths_a = generate_wideband(scen, 256, trial=3)
    frames_b, truths_b = generate_wideband(scen, 256, trial=3)
    assert np.array_equal(truths_a, truths_b)
    for fa, fb in zip(frames_a, frames_b):
        assert np.array_equal(fa.samples, fb.samples)


def test_trial_substreams_independent_of_order():
    scen = _scenario(0.5, seed=9)
    late_first, _ = generate_wideband(scen, 64, trial=5)
    _ = generate_wideband(scen, 64, trial=0)
    late_again, _ = generate_wideband(scen, 64, trial=5)
    for fa, fb in zip(late_first, late_again):
        assert np.array_equal(fa.samples, fb.samples)


def test_noise_whiteness():
    rng = substream(404, "white")
    n = 10**5
    frame = generate_band_frame(PuSignalModel("gaussian"), H0, 0.0, 1.0, n, rng)
    y = frame.samples
    bound = 4.0 / np.sqrt(n)
    for lag in range(1, 11):
        rho = np.mean(y[lag:] * np.conj(y[:-lag]))
        assert abs(rho) <= bound


def test_snr_calibration_converges():
    rng = substream(505, "snr")
    n = 10**6
    frame = generate_band_frame(PuSignalModel("gaussian"), H1, 0.1, 2.0, n, rng)
    measured = np.sum(np.abs(frame.pu_waveform) ** 2) / (n * 2.0)
    assert abs(measured - 0.1) <= 0.001


def test_real_domain_models_have_real_samples():
    rng = substream(606)
    frame = generate_band_frame(PuSignalModel("known-waveform"), H1, 0.5, 1.0, 512, rng)
    assert np.all(frame.samples.imag == 0.0)
    frame = generate_band_frame(PuSignalModel("bpsk"), H1, 0.5, 1.0, 512, rng)
    assert np.all(frame.samples.imag == 0.0)


def test_synthesize_psd_noiseless_piecewise():
    psd, edges = synthesize_wideband_psd([100, 200, 300], [5, 0, 3, 1], 1024)
    assert list(edges) == [100, 200, 300]
    jumps = np.nonzero(np.diff(psd))[0] + 1
    assert set(jumps) == {100, 200, 300}
    assert np.all(psd[:100] == 5) and np.all(psd[100:200] == 0)


def test_synthesize_psd_noise_floor_deviation():
    rng = substream(707)
    ideal, _ = synthesize_wideband_psd([100, 200, 300], [5, 0, 3, 1], 1024)
    noisy, _ = synthesize_wideband_psd([100, 200, 300], [5, 0, 3, 1], 1024,
                                       noise_floor=0.01, rng=rng)
    assert np.mean(np.abs(noisy - ideal)) <= 0.05


def test_synthesize_psd_degenerate_single_band():
    psd, edges = synthesize_wideband_psd([], [1], 256)
    assert edges.size == 0
    assert np.all(psd == 1.0)


def test_synthesize_psd_rejects_bad_edges():
    with pytest.raises(ValueError):
        synthesize_wideband_psd([0, 100], [1, 2, 3], 256)
    with pytest.raises(ValueError):
        synthesize_wideband_psd([100, 100], [1, 2, 3], 256)
    with pytest.raises(ValueError):
        synthesize_wideband_psd([100], [1], 256)


def test_scenario_validation():
    with pytest.raises(ValueError):
        WidebandScenario(0, 6e6, 0.5, 0.1, 1e6, 1)
    with pytest.raises(ValueError):
        WidebandScenario(2, 6e6, 1.5, 0.1, 1e6, 1)
    with pytest.raises(ValueError):
        WidebandScenario(2, 6e6, 0.5, -0.1, 1e6, 1)
