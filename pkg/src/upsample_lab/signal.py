"""Signal and kernel containers plus deterministic test-signal generators."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._rng import SplitMix64
from .errors import ShapeError
from .validation import check_positive_int, check_samples, check_weights


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Signal:
    """Multi-channel waveform, ``samples`` has shape (channels, time)."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen(check_samples(self.samples)))
        object.__setattr__(self, "sample_rate", check_positive_int(self.sample_rate, "sample_rate"))

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def time(self) -> int:
        return self.samples.shape[1]

    def channel(self, c: int) -> np.ndarray:
        return self.samples[c]

    def with_samples(self, samples, sample_rate: int | None = None) -> "Signal":
        return Signal(samples, self.sample_rate if sample_rate is None else sample_rate)

    def __eq__(self, other):
        if not isinstance(other, Signal):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(self.samples, other.samples)

    def __repr__(self):
        return f"Signal(channels={self.channels}, time={self.time}, sample_rate={self.sample_rate})"


@dataclass(frozen=True, eq=False)
class Kernel:
    """Convolution weights (out_channels, in_channels, length) and optional bias."""

    weights: np.ndarray
    bias: np.ndarray | None = field(default=None)

    def __post_init__(self):
        w = check_weights(self.weights)
        object.__setattr__(self, "weights", _frozen(w))
        if self.bias is not None:
            b = np.asarray(self.bias, dtype=np.float64).reshape(-1)
            if b.shape != (w.shape[0],):
                raise ShapeError(f"bias must have {w.shape[0]} entries, got {b.shape}")
            if not np.all(np.isfinite(b)):
                raise ShapeError("bias contains non-finite values")
            object.__setattr__(self, "bias", _frozen(b))

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def length(self) -> int:
        return self.weights.shape[2]

    def __eq__(self, other):
        if not isinstance(other, Kernel):
            return NotImplemented
        if (self.bias is None) != (other.bias is None):
            return False
        same_bias = self.bias is None or np.array_equal(self.bias, other.bias)
        return same_bias and np.array_equal(self.weights, other.weights)

    def __repr__(self):
        return f"Kernel(shape={self.weights.shape}, bias={'yes' if self.bias is not None else 'no'})"


def white_noise(n: int, sample_rate: int, seed: int = 0, *, channels: int = 1,
                offset: float = 0.0, scale: float = 1.0) -> Signal:
    """Gaussian white noise, optionally riding on a constant ``offset``.

    An offset gives the noise a zero-frequency component. Upsamplers with
    periodic weights turn that component into tones, which is how a
    white-noise probe exposes them.
    """
    rng = SplitMix64(seed)
    return Signal(offset + scale * rng.normal((channels, n)), sample_rate)


def ones(n: int, sample_rate: int, channels: int = 1) -> Signal:
    return Signal(np.ones((channels, n)), sample_rate)


def sine(n: int, sample_rate: int, frequency: float, amplitude: float = 1.0,
         phase: float = 0.0) -> Signal:
    t = np.arange(n) / sample_rate
    return Signal(amplitude * np.sin(2 * np.pi * frequency * t + phase), sample_rate)


def harmonic_signal(n: int, sample_rate: int, seed: int = 0, fundamental: float = 220.0,
                    n_harmonics: int = 6) -> Signal:
    """Synthetic stand-in for a music excerpt: decaying harmonics with vibrato."""
    rng = SplitMix64(seed)
    t = np.arange(n) / sample_rate
    vib = 1.0 + 0.004 * np.sin(2 * np.pi * 5.0 * t)
    out = np.zeros(n)
    phases = rng.uniform(0, 2 * np.pi, n_harmonics)
    for h in range(1, n_harmonics + 1):
        f = fundamental * h
        if f >= sample_rate / 2:
            break
        out += (0.8 ** h) * np.sin(2 * np.pi * f * t * vib + phases[h - 1])
    envelope = 0.6 + 0.4 * np.abs(np.sin(np.pi * t * 2.0))
    return Signal(0.5 * out * envelope + 0.01 * rng.normal(n), sample_rate)
