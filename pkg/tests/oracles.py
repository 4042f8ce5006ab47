"""Slow, loop-based reference implementations used as test oracles.

Nothing here imports the package under test.
"""
from __future__ import annotations

import cmath
import math

MASK64 = (1 << 64) - 1


def scatter_add_transposed(x, w, stride):
    """Brute-force transposed convolution on nested lists.

    x: [in][T], w: [out][in][L]. Each input sample drops a scaled copy of
    the kernel at ``t * stride``; overlaps are summed.
    """
    c_in, T = len(x), len(x[0])
    c_out, L = len(w), len(w[0][0])
    out = [[0.0] * ((T - 1) * stride + L) for _ in range(c_out)]
    for o in range(c_out):
        for i in range(c_in):
            for t in range(T):
                for l in range(L):
                    out[o][t * stride + l] += w[o][i][l] * x[i][t]
    return out


def direct_conv(x, w, stride):
    c_in, T = len(x), len(x[0])
    c_out, L = len(w), len(w[0][0])
    n = (T - L) // stride + 1
    out = [[0.0] * n for _ in range(c_out)]
    for o in range(c_out):
        for t in range(n):
            acc = 0.0
            for i in range(c_in):
                for l in range(L):
                    acc += w[o][i][l] * x[i][t * stride + l]
            out[o][t] = acc
    return out


def stretch_then_filter(x, taps, r, pad_left, pad_right):
    """Zero-insert by r, zero-pad, then correlate with ``taps`` (single channel)."""
    s = [0.0] * (len(x) * r)
    for t, v in enumerate(x):
        s[t * r] = v
    s = [0.0] * pad_left + s + [0.0] * pad_right
    L = len(taps)
    return [sum(taps[l] * s[n + l] for l in range(L)) for n in range(len(s) - L + 1)]


def hold(x, r):
    return [x[n // r] for n in range(len(x) * r)]


def shuffle(x, r):
    C = len(x) // r
    T = len(x[0])
    out = [[0.0] * (T * r) for _ in range(C)]
    for c in range(C):
        for t in range(T):
            for j in range(r):
                out[c][r * t + j] = x[j * C + c][t]
    return out


def naive_dft(x, inverse=False):
    n = len(x)
    sign = 1 if inverse else -1
    out = [sum(x[k] * cmath.exp(sign * 2j * math.pi * k * m / n) for k in range(n)) for m in range(n)]
    if inverse:
        out = [v / n for v in out]
    return out


def splitmix64_stream(seed, n):
    """Scalar SplitMix64 (Steele, Lea and Flood), one 64-bit output per step."""
    state = seed & MASK64
    out = []
    for _ in range(n):
        state = (state + 0x9E3779B97F4A7C15) & MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        out.append(z ^ (z >> 31))
    return out


def transfer_magnitude(taps, omega):
    return abs(sum(h * cmath.exp(-1j * omega * n) for n, h in enumerate(taps)))


def stft_frame_count(T, n_fft, hop, center):
    if center:
        return T // hop + 1
    return (T - n_fft) // hop + 1
