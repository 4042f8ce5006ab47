"""Declarative upsampling layers, kernel initialisation, and stacks."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import ops
from ._rng import SplitMix64, derive_seed
from .errors import ConfigError, RateMismatchError, ShapeError
from .signal import Kernel, Signal
from .validation import check_positive_int


class LayerKind(str, enum.Enum):
    TRANSPOSED_CONV = "TransposedConv"
    NEAREST_UPSAMPLE = "NearestUpsample"
    LINEAR_UPSAMPLE = "LinearUpsample"
    INTERP_PLUS_CONV = "InterpPlusConv"
    SUBPIXEL_CONV = "SubpixelConv"
    PLAIN_CONV = "PlainConv"


class Overlap(str, enum.Enum):
    NO_OVERLAP = "NoOverlap"
    PARTIAL_OVERLAP = "PartialOverlap"
    FULL_OVERLAP = "FullOverlap"


@dataclass(frozen=True)
class Init:
    """Weight initialisation: ``RandomUniform``, ``Constant`` (with ``value``) or ``ICNR``."""

    kind: str = "RandomUniform"
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("RandomUniform", "Constant", "ICNR"):
            raise ConfigError(f"unknown init {self.kind!r}")

    @classmethod
    def constant(cls, value: float) -> "Init":
        return cls("Constant", float(value))

    def to_dict(self):
        if self.kind == "Constant":
            return {"type": "Constant", "value": self.value}
        return {"type": self.kind}

    @classmethod
    def from_dict(cls, d) -> "Init":
        if isinstance(d, str):
            return cls(d)
        return cls(d["type"], float(d.get("value", 0.0)))


_KERNEL_KINDS = {
    LayerKind.TRANSPOSED_CONV,
    LayerKind.INTERP_PLUS_CONV,
    LayerKind.SUBPIXEL_CONV,
    LayerKind.PLAIN_CONV,
}


@dataclass(frozen=True)
class LayerSpec:
    """One layer of an upsampling stack.

    ``stride`` applies to transposed and plain convolutions, ``factor`` to
    the interpolation and subpixel layers. ``mode`` selects the interpolator
    of an ``InterpPlusConv`` layer. ``bias_value`` pins the bias when
    ``use_bias`` is set; otherwise the bias follows ``init``.
    """

    kind: LayerKind
    length: int = 1
    stride: int = 1
    factor: int = 1
    init: Init = field(default_factory=Init)
    use_bias: bool = False
    activation: str | None = None
    in_channels: int = 1
    out_channels: int = 1
    mode: str = "nearest"
    seed: int | None = None
    bias_value: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", LayerKind(self.kind))
        if isinstance(self.init, (str, dict)):
            object.__setattr__(self, "init", Init.from_dict(self.init))
        if self.activation in ("None", "none", ""):
            object.__setattr__(self, "activation", None)
        check_positive_int(self.length, "length")
        check_positive_int(self.stride, "stride")
        check_positive_int(self.factor, "factor")
        check_positive_int(self.in_channels, "in_channels")
        check_positive_int(self.out_channels, "out_channels")
        if self.activation not in (None, "ReLU"):
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.mode not in ("nearest", "linear"):
            raise ConfigError(f"unknown interpolation mode {self.mode!r}")
        if self.init.kind == "ICNR" and self.kind is not LayerKind.SUBPIXEL_CONV:
            raise ConfigError("ICNR initialisation only applies to SubpixelConv layers")
        if self.kind in (LayerKind.NEAREST_UPSAMPLE, LayerKind.LINEAR_UPSAMPLE):
            if self.in_channels != self.out_channels:
                raise ConfigError("interpolation layers keep the channel count")
            if self.use_bias:
                raise ConfigError("interpolation layers have no bias")

    @property
    def has_kernel(self) -> bool:
        return self.kind in _KERNEL_KINDS

    @property
    def upsampling_factor(self) -> int:
        if self.kind is LayerKind.TRANSPOSED_CONV:
            return self.stride
        if self.kind is LayerKind.PLAIN_CONV:
            return 1
        return self.factor

    @property
    def downsampling_factor(self) -> int:
        return self.stride if self.kind is LayerKind.PLAIN_CONV else 1

    @property
    def overlap(self) -> Overlap | None:
        """Overlap class of a transposed convolution (``None`` for other kinds)."""
        if self.kind is not LayerKind.TRANSPOSED_CONV:
            return None
        if self.length == self.stride:
            return Overlap.NO_OVERLAP
        if self.length % self.stride == 0:
            return Overlap.FULL_OVERLAP
        return Overlap.PARTIAL_OVERLAP

    def kernel_shape(self) -> tuple[int, int, int] | None:
        if not self.has_kernel:
            return None
        out = self.out_channels
        if self.kind is LayerKind.SUBPIXEL_CONV:
            out *= self.factor
        return (out, self.in_channels, self.length)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "length": self.length,
            "stride": self.stride,
            "factor": self.factor,
            "init": self.init.to_dict(),
            "seed": self.seed,
            "use_bias": self.use_bias,
            "bias_value": self.bias_value,
            "activation": self.activation if self.activation else "None",
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "mode": self.mode,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown layer fields: {sorted(unknown)}")
        if "kind" not in d:
            raise ConfigError("layer is missing 'kind'")
        kw = dict(d)
        if "init" in kw:
            kw["init"] = Init.from_dict(kw["init"])
        try:
            return cls(**kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def init_kernel(spec: LayerSpec, seed: int) -> Kernel | None:
    """Realise the kernel of ``spec`` deterministically from ``seed``.

    RandomUniform draws i.i.d. from ``U[-s, s]`` with
    ``s = 1 / sqrt(in_channels * length)`` (bias from the same range).
    ICNR draws one sub-kernel per output channel and copies it to all
    ``factor`` shuffle groups, so the fresh layer behaves like nearest
    neighbour upsampling after a shared convolution. Parameterless
    interpolation layers return ``None``.
    """
    shape = spec.kernel_shape()
    if shape is None:
        return None
    rng = SplitMix64(seed)
    s = 1.0 / math.sqrt(spec.in_channels * spec.length)
    bias = None
    if spec.init.kind == "Constant":
        w = np.full(shape, spec.init.value)
        if spec.use_bias:
            bias = np.zeros(shape[0])
    elif spec.init.kind == "RandomUniform":
        w = rng.uniform(-s, s, shape)
        if spec.use_bias:
            bias = rng.uniform(-s, s, shape[0])
    else:  # ICNR
        sub = rng.uniform(-s, s, (spec.out_channels, spec.in_channels, spec.length))
        w = np.concatenate([sub] * spec.factor, axis=0)
        if spec.use_bias:
            bias = np.tile(rng.uniform(-s, s, spec.out_channels), spec.factor)
    if spec.use_bias and spec.bias_value is not None:
        bias = np.full(shape[0], float(spec.bias_value))
    return Kernel(w, bias)


@dataclass(frozen=True, eq=False)
class Layer:
    spec: LayerSpec
    kernel: Kernel | None


def apply_layer(x: Signal, layer: Layer) -> Signal:
    """Run one realised layer, including bias and activation."""
    spec, k = layer.spec, layer.kernel
    arr = x.samples
    kind = spec.kind
    if kind is LayerKind.TRANSPOSED_CONV:
        y = ops._add_bias(ops._transposed_conv1d(arr, k.weights, spec.stride), k.bias)
    elif kind is LayerKind.PLAIN_CONV:
        y = ops._add_bias(ops._conv1d(arr, k.weights, spec.stride), k.bias)
    elif kind is LayerKind.NEAREST_UPSAMPLE:
        y = np.repeat(arr, spec.factor, axis=1)
    elif kind is LayerKind.LINEAR_UPSAMPLE:
        y = ops._linear_polyphase(arr, spec.factor)
    elif kind is LayerKind.INTERP_PLUS_CONV:
        up = np.repeat(arr, spec.factor, axis=1) if spec.mode == "nearest" \
            else ops._linear_polyphase(arr, spec.factor)
        y = ops._add_bias(ops._conv1d(up, k.weights, 1), k.bias)
    elif kind is LayerKind.SUBPIXEL_CONV:
        y = ops._shuffle(ops._add_bias(ops._conv1d(arr, k.weights, 1), k.bias), spec.factor)
    else:  # pragma: no cover
        raise ConfigError(f"unhandled layer kind {kind}")
    if spec.activation == "ReLU":
        y = np.maximum(y, 0.0)
    rate = x.sample_rate * spec.upsampling_factor
    if spec.downsampling_factor > 1:
        rate //= spec.downsampling_factor
    return Signal(y, rate)


@dataclass(frozen=True, eq=False)
class Stack:
    """Ordered, realised upsampling pipeline."""

    layers: tuple[Layer, ...]
    input_rate: int

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        check_positive_int(self.input_rate, "input_rate")
        rate = self.input_rate
        prev_channels = None
        for i, layer in enumerate(self.layers):
            spec = layer.spec
            if prev_channels is not None and spec.in_channels != prev_channels:
                raise ShapeError(f"layer {i} expects {spec.in_channels} channels, "
                                 f"previous layer emits {prev_channels}")
            expected = spec.kernel_shape()
            got = None if layer.kernel is None else layer.kernel.weights.shape
            if expected != got:
                raise ShapeError(f"layer {i} kernel shape {got} does not match spec {expected}")
            rate *= spec.upsampling_factor
            if rate % spec.downsampling_factor:
                raise RateMismatchError(f"layer {i}: rate {rate} not divisible by stride {spec.stride}")
            rate //= spec.downsampling_factor
            prev_channels = spec.out_channels

    @property
    def specs(self) -> list[LayerSpec]:
        return [layer.spec for layer in self.layers]

    @property
    def in_channels(self) -> int:
        return self.layers[0].spec.in_channels if self.layers else 1

    def rates(self) -> list[int]:
        """Sampling rate after each layer, starting with the input rate."""
        out = [self.input_rate]
        for spec in self.specs:
            out.append(out[-1] * spec.upsampling_factor // spec.downsampling_factor)
        return out

    @property
    def output_rate(self) -> int:
        return self.rates()[-1]

    def with_kernels(self, kernels) -> "Stack":
        return Stack(tuple(Layer(l.spec, k) for l, k in zip(self.layers, kernels)), self.input_rate)

    def __eq__(self, other):
        if not isinstance(other, Stack):
            return NotImplemented
        return (self.input_rate == other.input_rate
                and len(self.layers) == len(other.layers)
                and all(a.spec == b.spec and a.kernel == b.kernel
                        for a, b in zip(self.layers, other.layers)))


def build_stack(specs, input_rate: int, seed: int = 0) -> Stack:
    """Realise kernels for ``specs``; a layer without its own seed derives one from ``seed``."""
    layers = []
    for i, spec in enumerate(specs):
        if isinstance(spec, dict):
            spec = LayerSpec.from_dict(spec)
        layer_seed = spec.seed if spec.seed is not None else derive_seed(seed, i)
        layers.append(Layer(spec, init_kernel(spec, layer_seed)))
    return Stack(tuple(layers), input_rate)


def apply_stack(x: Signal, stack: Stack) -> list[Signal]:
    """Return ``[x, layer1(x), layer2(layer1(x)), ...]``."""
    if x.sample_rate != stack.input_rate:
        raise RateMismatchError(f"signal at {x.sample_rate} Hz, stack expects {stack.input_rate} Hz")
    outs = [x]
    for layer in stack.layers:
        outs.append(apply_layer(outs[-1], layer))
    return outs


def output_length(stack: Stack, n: int) -> int:
    """Length of the stack output for an input of ``n`` samples."""
    for spec in stack.specs:
        L = spec.length
        if spec.kind is LayerKind.TRANSPOSED_CONV:
            n = (n - 1) * spec.stride + L
        elif spec.kind is LayerKind.PLAIN_CONV:
            n = (n - L) // spec.stride + 1
        elif spec.kind in (LayerKind.NEAREST_UPSAMPLE, LayerKind.LINEAR_UPSAMPLE):
            n = n * spec.factor
        elif spec.kind is LayerKind.INTERP_PLUS_CONV:
            n = n * spec.factor - L + 1
        else:
            n = (n - L + 1) * spec.factor
        if n < 1:
            raise ShapeError("input too short for this stack")
    return n


def alignment(stack: Stack) -> tuple[float, float]:
    """Map output sample index to input time: ``t_in = (n - offset) / scale``.

    Each layer's taps are assumed centred, so this is the zero-phase
    alignment a well-trained stack would converge to.
    """
    scale, offset = 1.0, 0.0
    for spec in stack.specs:
        L = spec.length
        kind = spec.kind
        if kind is LayerKind.TRANSPOSED_CONV:
            a, b = spec.stride, (L - 1) / 2
        elif kind is LayerKind.PLAIN_CONV:
            a, b = 1 / spec.stride, -(L - 1) / 2 / spec.stride
        elif kind is LayerKind.NEAREST_UPSAMPLE:
            a, b = spec.factor, (spec.factor - 1) / 2
        elif kind is LayerKind.LINEAR_UPSAMPLE:
            a, b = spec.factor, 0.0
        elif kind is LayerKind.INTERP_PLUS_CONV:
            hold = (spec.factor - 1) / 2 if spec.mode == "nearest" else 0.0
            a, b = spec.factor, hold - (L - 1) / 2
        else:
            a, b = spec.factor, -spec.factor * (L - 1) / 2 + (spec.factor - 1) / 2
        scale, offset = scale * a, offset * a + b
    return scale, offset


def strip_offsets(stack: Stack) -> Stack:
    """Remove every bias and the ReLU of the first layer (the offset-free variant)."""
    layers = []
    for i, layer in enumerate(stack.layers):
        spec = replace(layer.spec, use_bias=False, bias_value=None,
                       activation=None if i == 0 else layer.spec.activation)
        k = None if layer.kernel is None else Kernel(layer.kernel.weights)
        layers.append(Layer(spec, k))
    return Stack(tuple(layers), stack.input_rate)
