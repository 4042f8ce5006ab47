"""Radix-2 FFT, STFT spectrograms, and kernel frequency responses."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .signal import Kernel, Signal
from .validation import check_positive_int

DEFAULT_FLOOR_DB = -100.0
EPS = 1e-10


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


_bitrev_cache: dict[int, np.ndarray] = {}


def _bit_reverse(n: int) -> np.ndarray:
    if n not in _bitrev_cache:
        bits = n.bit_length() - 1
        idx = np.arange(n)
        rev = np.zeros(n, dtype=np.int64)
        for b in range(bits):
            rev |= ((idx >> b) & 1) << (bits - 1 - b)
        _bitrev_cache[n] = rev
    return _bitrev_cache[n]


def fft(x, inverse: bool = False) -> np.ndarray:
    """Iterative radix-2 decimation-in-time FFT along the last axis.

    The forward transform is unnormalised; the inverse divides by ``N``.
    Leading axes are transformed independently (batched frames).
    """
    a = np.array(x, dtype=np.complex128)
    n = a.shape[-1]
    if not _is_pow2(n):
        raise ShapeError(f"FFT length must be a power of two, got {n}")
    a = a[..., _bit_reverse(n)]
    lead = a.shape[:-1]
    sign = 1.0 if inverse else -1.0
    m = 2
    while m <= n:
        half = m // 2
        tw = np.exp(sign * 2j * np.pi * np.arange(half) / m)
        blocks = a.reshape(lead + (n // m, m))
        even = blocks[..., :half]
        odd = blocks[..., half:] * tw
        a = np.concatenate([even + odd, even - odd], axis=-1).reshape(lead + (n,))
        m *= 2
    if inverse:
        a /= n
    return a


def rfft_mag(frames: np.ndarray) -> np.ndarray:
    n = frames.shape[-1]
    return np.abs(fft(frames)[..., : n // 2 + 1])


@dataclass(frozen=True)
class StftConfig:
    """STFT analysis settings; defaults follow the left-aligned, unpadded convention."""

    n_fft: int = 2048
    hop: int = 512
    window: str = "hann"
    center: bool = False
    pad_mode: str = "reflect"
    floor_db: float = DEFAULT_FLOOR_DB

    def __post_init__(self):
        check_positive_int(self.n_fft, "n_fft")
        check_positive_int(self.hop, "hop")
        if not _is_pow2(self.n_fft):
            raise ConfigError(f"n_fft must be a power of two, got {self.n_fft}")
        if self.hop > self.n_fft:
            raise ConfigError("hop must not exceed n_fft")
        if self.window not in ("hann", "rectangular"):
            raise ConfigError(f"unknown window {self.window!r}")
        if self.pad_mode not in ("reflect", "constant"):
            raise ConfigError(f"unknown pad mode {self.pad_mode!r}")

    def frame_count(self, n_samples: int) -> int:
        if self.center:
            return n_samples // self.hop + 1
        if n_samples < self.n_fft:
            return 0
        return (n_samples - self.n_fft) // self.hop + 1

    def window_array(self) -> np.ndarray:
        if self.window == "rectangular":
            return np.ones(self.n_fft)
        # periodic Hann
        return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(self.n_fft) / self.n_fft)


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """Magnitudes in dB, shape (n_fft // 2 + 1, frames)."""

    magnitudes_db: np.ndarray
    bin_hz: float
    hop_s: float
    sample_rate: int
    floor_db: float = DEFAULT_FLOOR_DB

    @property
    def n_bins(self) -> int:
        return self.magnitudes_db.shape[0]

    @property
    def n_frames(self) -> int:
        return self.magnitudes_db.shape[1]

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(self.n_bins) * self.bin_hz

    def mean_db(self) -> np.ndarray:
        """Per-bin magnitude in dB averaged over frames."""
        return self.magnitudes_db.mean(axis=1)

    def bin_of(self, hz: float) -> int:
        return int(round(hz / self.bin_hz))


def stft(x, cfg: StftConfig | None = None, channel: int = 0, sample_rate: int | None = None) -> Spectrogram:
    """Short-time magnitude spectrum in dB.

    ``center=False``: no padding, ``floor((T - n_fft) / hop) + 1`` left-aligned
    frames. ``center=True``: pad ``n_fft / 2`` on both sides (reflect by
    default) so frame ``t`` is centred on sample ``t * hop``, giving
    ``floor(T / hop) + 1`` frames.
    """
    cfg = cfg or StftConfig()
    if isinstance(x, Signal):
        data = x.samples[channel]
        rate = x.sample_rate
    else:
        data = np.asarray(x, dtype=np.float64)
        if data.ndim == 2:
            data = data[channel]
        if sample_rate is None:
            raise ConfigError("sample_rate is required for raw arrays")
        rate = sample_rate
    n = cfg.n_fft
    if cfg.center:
        half = n // 2
        if cfg.pad_mode == "reflect" and data.size <= half:
            raise ShapeError(f"reflect padding needs more than {half} samples, got {data.size}")
        data = np.pad(data, half, mode=cfg.pad_mode)
    elif data.size < n:
        raise ShapeError(f"signal of {data.size} samples is shorter than one frame ({n})")
    frames = np.lib.stride_tricks.sliding_window_view(data, n)[:: cfg.hop]
    mag = rfft_mag(frames * cfg.window_array())
    db = np.maximum(20.0 * np.log10(mag + EPS), cfg.floor_db)
    return Spectrogram(db.T.copy(), rate / n, cfg.hop / rate, rate, cfg.floor_db)


def freq_response(k, n_points: int = 512) -> np.ndarray:
    """``|H(w)|`` of a 1-D kernel at ``w = pi * j / (n_points - 1)``.

    Direct evaluation of ``H(w) = sum_l k[l] exp(-i w l)``.
    """
    check_positive_int(n_points, "n_points", minimum=2)
    if isinstance(k, Kernel):
        k = k.weights[0, 0]
    taps = np.asarray(k, dtype=np.float64).reshape(-1)
    w = np.pi * np.arange(n_points) / (n_points - 1)
    H = np.exp(-1j * np.outer(w, np.arange(taps.size))) @ taps
    return np.abs(H)
