import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from upsample_lab import Signal, StftConfig, fft, freq_response, interp_kernel, stft
from upsample_lab.errors import ConfigError, ShapeError
from upsample_lab.signal import sine, white_noise

from oracles import naive_dft, stft_frame_count, transfer_magnitude


def test_fft_impulse_and_dc():
    assert np.allclose(fft(np.array([1, 0, 0, 0], complex)), [1, 1, 1, 1], atol=0)
    assert np.allclose(fft(np.array([1, 1, 1, 1], complex)), [4, 0, 0, 0], atol=0)


def test_fft_rejects_non_power_of_two():
    with pytest.raises(ShapeError):
        fft(np.ones(6))


@pytest.mark.parametrize("n", [1, 2, 8, 32])
def test_fft_matches_naive_dft(n):
    x = np.random.default_rng(n).normal(size=n) + 1j * np.random.default_rng(n + 1).normal(size=n)
    assert np.allclose(fft(x), naive_dft(list(x)), atol=1e-10)
    assert np.allclose(fft(x, inverse=True), naive_dft(list(x), inverse=True), atol=1e-10)


def test_fft_agrees_with_numpy():
    x = np.random.default_rng(0).normal(size=(3, 4096))
    assert np.allclose(fft(x), np.fft.fft(x), atol=1e-9)


@pytest.mark.parametrize("p", [10, 12, 16])
def test_round_trip(p):
    x = np.random.default_rng(p).normal(size=2 ** p) + 1j * np.random.default_rng(p + 7).normal(size=2 ** p)
    assert np.max(np.abs(fft(fft(x), inverse=True) - x)) < 1e-10


@settings(max_examples=30, deadline=None)
@given(p=st.integers(0, 11), seed=st.integers(0, 10_000))
def test_parseval(p, seed):
    x = np.random.default_rng(seed).normal(size=2 ** p)
    X = fft(x)
    lhs = np.sum(x ** 2)
    rhs = np.sum(np.abs(X) ** 2) / x.size
    assert rhs == pytest.approx(lhs, rel=1e-9)


def test_frame_count_examples():
    x = Signal(np.random.default_rng(1).normal(size=2048), 4000)
    assert stft(x, StftConfig(2048, 512, center=False)).n_frames == 1
    assert stft(x, StftConfig(2048, 512, center=True)).n_frames == 5


@settings(max_examples=40, deadline=None)
@given(log_n=st.integers(3, 8), hop_div=st.integers(1, 4), extra=st.integers(0, 700), center=st.booleans())
def test_frame_count_formula(log_n, hop_div, extra, center):
    n = 2 ** log_n
    hop = max(1, n // hop_div)
    T = n + extra
    spec = stft(np.random.default_rng(extra).normal(size=T), StftConfig(n, hop, center=center), sample_rate=100)
    assert spec.n_frames == stft_frame_count(T, n, hop, center)
    assert spec.n_bins == n // 2 + 1
    assert np.all(np.isfinite(spec.magnitudes_db)) and spec.magnitudes_db.min() >= spec.floor_db


def test_short_signal_errors():
    with pytest.raises(ShapeError):
        stft(Signal(np.ones(100), 10), StftConfig(256, 64))
    with pytest.raises(ConfigError):
        stft(np.ones(300), StftConfig(256, 64))


@pytest.mark.parametrize("kw", [{"n_fft": 1000}, {"hop": 0}, {"hop": 4096}, {"window": "kaiser"},
                                {"pad_mode": "wrap"}])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        StftConfig(**kw)


def test_sine_at_bin_centre_peaks_there():
    rate, n = 8000, 256
    k = 19
    x = sine(4096, rate, k * rate / n)
    spec = stft(x, StftConfig(n, 64))
    assert np.all(np.argmax(spec.magnitudes_db, axis=0) == k)


def test_zero_signal_hits_floor():
    spec = stft(Signal(np.zeros(512), 10), StftConfig(256, 128))
    assert np.all(spec.magnitudes_db == -100.0)


def test_uncentred_frames_equal_interior_centred_frames():
    x = white_noise(8192, 4000, 5)
    a = stft(x, StftConfig(2048, 512, center=False)).magnitudes_db
    b = stft(x, StftConfig(2048, 512, center=True)).magnitudes_db
    shift = 2048 // 2 // 512
    assert np.max(np.abs(a - b[:, shift:shift + a.shape[1]])) <= 1e-12


def test_freq_response_examples():
    rect = freq_response([1.0, 1.0], 5)
    tri = freq_response([0.5, 1.0, 0.5], 5)
    assert rect[0] == pytest.approx(2.0) and rect[-1] == pytest.approx(0.0, abs=1e-15)
    assert tri[0] == pytest.approx(2.0) and tri[-1] == pytest.approx(0.0, abs=1e-15)


def test_freq_response_matches_oracle():
    taps = [0.3, -1.0, 2.0, 0.25]
    got = freq_response(taps, 9)
    want = [transfer_magnitude(taps, np.pi * j / 8) for j in range(9)]
    assert np.allclose(got, want, atol=1e-12)


@pytest.mark.parametrize("r", [2, 3, 4, 5])
def test_linear_response_below_nearest(r):
    n = 1025
    near = freq_response(interp_kernel("nearest", r), n)
    lin = freq_response(interp_kernel("linear", r), n)
    assert near[0] == pytest.approx(lin[0])  # equal DC gain, no rescaling needed
    w = np.pi * np.arange(n) / (n - 1)
    band = w >= np.pi / r
    assert np.all(lin[band] <= near[band] + 1e-12)


def test_freq_response_needs_two_points():
    with pytest.raises(ConfigError):
        freq_response([1.0], 1)
