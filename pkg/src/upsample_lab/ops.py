"""Upsampling operators on 1-D multi-channel signals.

Every operator accepts either a :class:`~upsample_lab.signal.Signal` or a raw
array of shape (channels, time) and returns the same kind. Convolutions use
the cross-correlation convention (no kernel flip), as deep-learning
frameworks do. All arithmetic is float64.

Sampling-rate bookkeeping: operators parameterised by an upsampling factor
(``stretch``, the interpolators, ``periodic_shuffle``, ``subpixel_upsample``)
and ``transposed_conv1d`` multiply the rate by that factor. ``conv1d`` leaves
the rate unchanged; strided downsampling rates are handled by
:class:`~upsample_lab.layers.Stack`.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigError, ShapeError
from .signal import Kernel, Signal
from .validation import check_positive_int, check_samples, check_weights

__all__ = [
    "conv1d",
    "transposed_conv1d",
    "stretch",
    "interp_kernel",
    "nearest_upsample",
    "linear_upsample",
    "interpolate_by_convolution",
    "periodic_shuffle",
    "inverse_periodic_shuffle",
    "subpixel_upsample",
]


def _unpack(x):
    if isinstance(x, Signal):
        return x.samples, x.sample_rate
    return check_samples(x, "x"), None


def _pack(arr, rate, factor=1):
    if rate is None:
        return arr
    return Signal(arr, rate * factor)


def _kernel_parts(k):
    if isinstance(k, Kernel):
        return k.weights, k.bias
    return check_weights(k), None


# array-level kernels; also used by the autodiff tape

def _conv1d(x: np.ndarray, w: np.ndarray, stride: int) -> np.ndarray:
    c_in, T = x.shape
    c_out, k_in, L = w.shape
    if k_in != c_in:
        raise ShapeError(f"kernel expects {k_in} input channels, signal has {c_in}")
    if T < L:
        raise ShapeError(f"signal length {T} shorter than kernel length {L}")
    n_out = (T - L) // stride + 1
    out = np.zeros((c_out, n_out))
    span = stride * (n_out - 1) + 1
    for l in range(L):
        out += w[:, :, l] @ x[:, l:l + span:stride]
    return out


def _transposed_conv1d(x: np.ndarray, w: np.ndarray, stride: int) -> np.ndarray:
    c_in, T = x.shape
    c_out, k_in, L = w.shape
    if k_in != c_in:
        raise ShapeError(f"kernel expects {k_in} input channels, signal has {c_in}")
    if T < 1:
        raise ShapeError("transposed convolution needs at least one input sample")
    out = np.zeros((c_out, (T - 1) * stride + L))
    span = (T - 1) * stride + 1
    for l in range(L):
        # overlapping contributions are summed, never averaged
        out[:, l:l + span:stride] += w[:, :, l] @ x
    return out


def _stretch(x: np.ndarray, r: int) -> np.ndarray:
    out = np.zeros((x.shape[0], x.shape[1] * r))
    out[:, ::r] = x
    return out


def _shuffle(x: np.ndarray, r: int) -> np.ndarray:
    rc, T = x.shape
    if rc % r:
        raise ShapeError(f"{rc} channels not divisible by factor {r}")
    c = rc // r
    return x.reshape(r, c, T).transpose(1, 2, 0).reshape(c, T * r)


def _unshuffle(y: np.ndarray, r: int) -> np.ndarray:
    c, rT = y.shape
    if rT % r:
        raise ShapeError(f"length {rT} not divisible by factor {r}")
    T = rT // r
    return y.reshape(c, T, r).transpose(2, 0, 1).reshape(r * c, T)


def _add_bias(y, bias):
    if bias is None:
        return y
    return y + bias[:, np.newaxis]


# public operators

def conv1d(x, k, stride: int = 1):
    """Valid-region strided cross-correlation.

    ``out[c, t] = sum_{i,l} k[c, i, l] * x[i, t*stride + l] + bias[c]`` with
    ``floor((T - length) / stride) + 1`` output samples.
    """
    stride = check_positive_int(stride, "stride")
    arr, rate = _unpack(x)
    w, b = _kernel_parts(k)
    return _pack(_add_bias(_conv1d(arr, w, stride), b), rate)


def transposed_conv1d(x, k, stride: int = 1):
    """Scatter-add each input sample times the kernel, every ``stride`` samples.

    Output length is ``(T - 1) * stride + length`` with no cropping, so the
    boundary ramps stay visible. When ``stride > length`` the gaps are zero.
    """
    stride = check_positive_int(stride, "stride")
    arr, rate = _unpack(x)
    w, b = _kernel_parts(k)
    return _pack(_add_bias(_transposed_conv1d(arr, w, stride), b), rate, stride)


def stretch(x, r: int):
    """Zero insertion: ``out[c, r*t] = x[c, t]``, every other sample is 0."""
    r = check_positive_int(r, "r")
    arr, rate = _unpack(x)
    return _pack(_stretch(arr, r), rate, r)


def interp_kernel(mode: str, r: int) -> Kernel:
    """Fixed interpolation filter applied after :func:`stretch`.

    ``nearest`` gives ``r`` ones (zero-order hold, a sinc response); ``linear``
    gives the unit-centre triangle ``[1, 2, ..., r, ..., 2, 1] / r`` of length
    ``2r - 1`` (a sinc-squared response).
    """
    r = check_positive_int(r, "r")
    if mode == "nearest":
        w = np.ones(r)
    elif mode == "linear":
        w = np.concatenate([np.arange(1, r + 1), np.arange(r - 1, 0, -1)]) / r
    else:
        raise ConfigError(f"unknown interpolation mode {mode!r}")
    return Kernel(w.reshape(1, 1, -1))


def nearest_upsample(x, r: int):
    """Hold each sample ``r`` times: ``out[c, n] = x[c, n // r]``."""
    r = check_positive_int(r, "r")
    arr, rate = _unpack(x)
    return _pack(np.repeat(arr, r, axis=1), rate, r)


def _linear_polyphase(arr: np.ndarray, r: int) -> np.ndarray:
    C, T = arr.shape
    nxt = np.zeros_like(arr)
    nxt[:, :-1] = arr[:, 1:]
    out = np.empty((C, T * r))
    out[:, 0::r] = 1.0 * arr
    for j in range(1, r):
        # same products, same summation order as the stretch+conv form
        out[:, j::r] = ((r - j) / r) * arr + (j / r) * nxt
    return out


def linear_upsample(x, r: int):
    """Linear interpolation, centre aligned with zero padding.

    Samples at multiples of ``r`` reproduce the input. Past the last input
    sample the interpolation ramps toward the zero padding, so the final
    ``r - 1`` outputs roll off.
    """
    r = check_positive_int(r, "r")
    arr, rate = _unpack(x)
    return _pack(_linear_polyphase(arr, r), rate, r)


def interpolate_by_convolution(x, mode: str, r: int):
    """Reference construction: stretch, zero-pad, then correlate with the interp kernel.

    Used to cross-check :func:`nearest_upsample` and :func:`linear_upsample`.
    """
    r = check_positive_int(r, "r")
    arr, rate = _unpack(x)
    C = arr.shape[0]
    taps = interp_kernel(mode, r).weights[0, 0]
    w = np.zeros((C, C, taps.size))
    for c in range(C):
        w[c, c] = taps
    s = _stretch(arr, r)
    if mode == "nearest":
        pad = (r - 1, 0)
    else:
        pad = (r - 1, r - 1)
    s = np.pad(s, ((0, 0), pad))
    return _pack(_conv1d(s, w, 1), rate, r)


def periodic_shuffle(x, r: int):
    """Interleave ``r`` channel groups along time.

    ``out[c, r*t + j] = x[j*C + c, t]`` where ``C = channels / r``.
    """
    r = check_positive_int(r, "r")
    arr, rate = _unpack(x)
    return _pack(_shuffle(arr, r), rate, r)


def inverse_periodic_shuffle(x, r: int):
    r = check_positive_int(r, "r")
    arr, rate = _unpack(x)
    out = _unshuffle(arr, r)
    if rate is None:
        return out
    if rate % r:
        raise ConfigError(f"sample rate {rate} not divisible by {r}")
    return Signal(out, rate // r)


def subpixel_upsample(x, k, r: int):
    """Stride-1 convolution to ``r*C`` channels followed by :func:`periodic_shuffle`.

    Output phase ``j`` of every block is produced by sub-kernel ``j`` alone,
    so nothing overlaps or adds across phases.
    """
    r = check_positive_int(r, "r")
    arr, rate = _unpack(x)
    w, b = _kernel_parts(k)
    if w.shape[0] % r:
        raise ShapeError(f"subpixel kernel emits {w.shape[0]} channels, not a multiple of {r}")
    y = _add_bias(_conv1d(arr, w, 1), b)
    return _pack(_shuffle(y, r), rate, r)
