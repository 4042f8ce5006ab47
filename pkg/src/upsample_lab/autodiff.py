"""Minimal reverse-mode differentiation over the upsampling layer zoo.

The tape records each operation with its cached inputs and a closure that
maps the output gradient to input gradients. ``backward`` replays the
records in exact reverse order.

The adjoint pairs are used literally. The input gradient of a strided
``conv1d`` is a ``transposed_conv1d`` of the upstream gradient with the
same stride, and the input gradient of a ``transposed_conv1d`` is a strided
``conv1d``. Under the cross-correlation convention used for both, neither
needs a kernel flip, only an in/out channel swap.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ops
from .errors import ConfigError, TapeError, TrainingDivergedError
from .layers import Layer, LayerKind, Stack, alignment, apply_stack, output_length
from .signal import Kernel, Signal, white_noise
from ._rng import SplitMix64
from .spectral import Spectrogram, StftConfig, stft


class Tensor:
    """A value on a tape, with a gradient slot filled by :meth:`Tape.backward`."""

    __slots__ = ("value", "grad", "tape", "index", "name", "requires_grad")

    def __init__(self, value, tape=None, index=-1, name=None, requires_grad=False):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.tape = tape
        self.index = index
        self.name = name
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, name={self.name!r})"


@dataclass
class _Record:
    output: Tensor
    inputs: tuple
    backward: object
    op: str


class Tape:
    """Records operations for one forward pass."""

    def __init__(self):
        self.records: list[_Record] = []
        self.params: dict[str, Tensor] = {}
        self._backward_done = False

    # leaves

    def parameter(self, name: str, value) -> Tensor:
        if name in self.params:
            raise TapeError(f"parameter {name!r} already registered")
        t = Tensor(np.array(value, dtype=np.float64), self, -1, name, True)
        self.params[name] = t
        return t

    def input(self, value, requires_grad: bool = True, name: str = "input") -> Tensor:
        return Tensor(np.array(value, dtype=np.float64), self, -1, name, requires_grad)

    def constant(self, value) -> Tensor:
        return Tensor(np.array(value, dtype=np.float64), self, -1, None, False)

    def _record(self, value, inputs, backward, op) -> Tensor:
        out = Tensor(value, self, len(self.records), op,
                     any(t.requires_grad for t in inputs if t is not None))
        self.records.append(_Record(out, tuple(inputs), backward, op))
        return out

    # operations

    def conv1d(self, x: Tensor, w: Tensor, stride: int = 1) -> Tensor:
        y = ops._conv1d(x.value, w.value, stride)
        T = x.value.shape[1]

        def back(g):
            gx = conv_input_gradient(g, w.value, stride, T)
            gw = np.empty_like(w.value)
            span = stride * (g.shape[1] - 1) + 1
            for l in range(w.value.shape[2]):
                gw[:, :, l] = g @ x.value[:, l:l + span:stride].T
            return gx, gw

        return self._record(y, (x, w), back, "conv1d")

    def transposed_conv1d(self, x: Tensor, w: Tensor, stride: int = 1) -> Tensor:
        y = ops._transposed_conv1d(x.value, w.value, stride)

        def back(g):
            gx = ops._conv1d(g, np.swapaxes(w.value, 0, 1), stride)
            gw = np.empty_like(w.value)
            span = (x.value.shape[1] - 1) * stride + 1
            for l in range(w.value.shape[2]):
                gw[:, :, l] = g[:, l:l + span:stride] @ x.value.T
            return gx, gw

        return self._record(y, (x, w), back, "transposed_conv1d")

    def add_bias(self, x: Tensor, b: Tensor) -> Tensor:
        return self._record(x.value + b.value[:, None], (x, b),
                            lambda g: (g, g.sum(axis=1)), "add_bias")

    def relu(self, x: Tensor) -> Tensor:
        mask = x.value > 0  # subgradient 0 at 0
        return self._record(np.where(mask, x.value, 0.0), (x,), lambda g: (g * mask,), "relu")

    def nearest_upsample(self, x: Tensor, r: int) -> Tensor:
        C, T = x.value.shape
        return self._record(np.repeat(x.value, r, axis=1), (x,),
                            lambda g: (g.reshape(C, T, r).sum(axis=2),), "nearest_upsample")

    def linear_upsample(self, x: Tensor, r: int) -> Tensor:
        C, T = x.value.shape

        def back(g):
            gx = 1.0 * g[:, 0::r]
            for j in range(1, r):
                gj = g[:, j::r]
                gx = gx + ((r - j) / r) * gj
                gx[:, 1:] += (j / r) * gj[:, :-1]  # out[r*t + j] reads x[t + 1]
            return (gx,)

        return self._record(ops._linear_polyphase(x.value, r), (x,), back, "linear_upsample")

    def periodic_shuffle(self, x: Tensor, r: int) -> Tensor:
        return self._record(ops._shuffle(x.value, r), (x,),
                            lambda g: (ops._unshuffle(g, r),), "periodic_shuffle")

    def l1_loss(self, y: Tensor, target, reduction: str = "mean") -> Tensor:
        """``mean|y - target|`` (or the sum); ``target=None`` means zeros."""
        t = np.zeros_like(y.value) if target is None else np.asarray(
            target.value if isinstance(target, Tensor) else target, dtype=np.float64)
        if t.shape != y.value.shape:
            raise ConfigError(f"target shape {t.shape} != output shape {y.value.shape}")
        d = y.value - t
        scale = 1.0 / d.size if reduction == "mean" else 1.0
        if reduction not in ("mean", "sum"):
            raise ConfigError(f"unknown reduction {reduction!r}")
        value = np.abs(d).sum() * scale
        return self._record(np.array(value), (y,), lambda g: (g * scale * np.sign(d),), "l1_loss")

    def mean(self, x: Tensor) -> Tensor:
        n = x.value.size
        return self._record(np.array(x.value.mean()), (x,),
                            lambda g: (np.full(x.value.shape, g / n),), "mean")

    def sum(self, x: Tensor) -> Tensor:
        return self._record(np.array(x.value.sum()), (x,),
                            lambda g: (np.full(x.value.shape, float(g)),), "sum")

    def dot(self, x: Tensor, weights) -> Tensor:
        wts = np.asarray(weights, dtype=np.float64)
        return self._record(np.array(np.sum(x.value * wts)), (x,), lambda g: (g * wts,), "dot")

    # reverse pass

    def backward(self, loss: Tensor) -> dict[str, np.ndarray]:
        """Fill gradient slots from scalar ``loss`` and return parameter gradients."""
        if not self.records:
            raise TapeError("backward called before any forward operation was recorded")
        if loss.tape is not self or loss.index < 0:
            raise TapeError("loss was not produced by this tape")
        if loss.value.size != 1:
            raise TapeError("loss must be a scalar")
        if self._backward_done:
            raise TapeError("backward already ran on this tape")
        for p in self.params.values():
            p.grad = np.zeros_like(p.value)
        grads: dict[int, np.ndarray] = {loss.index: np.ones_like(loss.value)}
        leaf_grads: dict[int, np.ndarray] = {}
        for rec in reversed(self.records[: loss.index + 1]):
            g = grads.pop(rec.output.index, None)
            if g is None:
                continue
            rec.output.grad = g
            for inp, gi in zip(rec.inputs, rec.backward(g)):
                if inp is None or not inp.requires_grad:
                    continue
                if inp.index >= 0:
                    grads[inp.index] = grads[inp.index] + gi if inp.index in grads else gi
                else:
                    key = id(inp)
                    leaf_grads[key] = leaf_grads[key] + gi if key in leaf_grads else gi
                    inp.grad = leaf_grads[key]
        self._backward_done = True
        return {name: p.grad for name, p in self.params.items()}


def backward(tape: Tape, loss: Tensor) -> dict[str, np.ndarray]:
    return tape.backward(loss)


def conv_input_gradient(upstream: np.ndarray, weights: np.ndarray, stride: int, n_in: int) -> np.ndarray:
    """Input gradient of a strided conv1d: a transposed conv of the upstream gradient.

    The transposed conv covers ``(T_out - 1) * stride + length`` samples; any
    trailing input samples the forward pass skipped get zero gradient.
    """
    g = ops._transposed_conv1d(upstream, np.swapaxes(weights, 0, 1), stride)
    if g.shape[1] < n_in:
        g = np.pad(g, ((0, 0), (0, n_in - g.shape[1])))
    return g


# stacks on the tape

def forward_layer(tape: Tape, x: Tensor, layer: Layer, index: int) -> Tensor:
    spec, k = layer.spec, layer.kernel
    kind = spec.kind
    w = b = None
    if k is not None:
        w = tape.parameter(f"layer{index}.weight", k.weights)
        if k.bias is not None:
            b = tape.parameter(f"layer{index}.bias", k.bias)

    def biased(y):
        return tape.add_bias(y, b) if b is not None else y

    if kind is LayerKind.TRANSPOSED_CONV:
        y = biased(tape.transposed_conv1d(x, w, spec.stride))
    elif kind is LayerKind.PLAIN_CONV:
        y = biased(tape.conv1d(x, w, spec.stride))
    elif kind is LayerKind.NEAREST_UPSAMPLE:
        y = tape.nearest_upsample(x, spec.factor)
    elif kind is LayerKind.LINEAR_UPSAMPLE:
        y = tape.linear_upsample(x, spec.factor)
    elif kind is LayerKind.INTERP_PLUS_CONV:
        up = tape.nearest_upsample(x, spec.factor) if spec.mode == "nearest" \
            else tape.linear_upsample(x, spec.factor)
        y = biased(tape.conv1d(up, w, 1))
    else:
        y = tape.periodic_shuffle(biased(tape.conv1d(x, w, 1)), spec.factor)
    if spec.activation == "ReLU":
        y = tape.relu(y)
    return y


def forward_stack(tape: Tape, x: Tensor, stack: Stack) -> Tensor:
    for i, layer in enumerate(stack.layers):
        x = forward_layer(tape, x, layer, i)
    return x


def stack_from_params(stack: Stack, params: dict[str, np.ndarray]) -> Stack:
    kernels = []
    for i, layer in enumerate(stack.layers):
        if layer.kernel is None:
            kernels.append(None)
            continue
        bias = params.get(f"layer{i}.bias") if layer.kernel.bias is not None else None
        kernels.append(Kernel(params[f"layer{i}.weight"], bias))
    return stack.with_kernels(kernels)


def stack_params(stack: Stack) -> dict[str, np.ndarray]:
    out = {}
    for i, layer in enumerate(stack.layers):
        if layer.kernel is not None:
            out[f"layer{i}.weight"] = np.array(layer.kernel.weights)
            if layer.kernel.bias is not None:
                out[f"layer{i}.bias"] = np.array(layer.kernel.bias)
    return out


# gradient analysis

def input_gradient(loss_net: Stack, x: Signal, reduction: str = "mean") -> Signal:
    """Gradient of ``mean`` (or ``sum``) of the critic output with respect to ``x``."""
    tape = Tape()
    xt = tape.input(x.samples)
    y = forward_stack(tape, xt, loss_net)
    loss = tape.mean(y) if reduction == "mean" else tape.sum(y)
    tape.backward(loss)
    return Signal(xt.grad, x.sample_rate)


def gradient_spectrum(loss_net: Stack, x: Signal, cfg: StftConfig | None = None,
                      reduction: str = "mean") -> Spectrogram:
    """Spectrogram of the input gradient of a scalar critic.

    Strided critics back-propagate through transposed convolutions, which
    leaves periodic structure (tones) in the gradient.
    """
    return stft(input_gradient(loss_net, x, reduction), cfg or StftConfig())


def predict_gradient_tones(loss_net: Stack) -> list[float]:
    """Frequencies imprinted on the input gradient by the critic's strides."""
    rate = loss_net.input_rate
    total = 1
    freqs = set()
    for spec in loss_net.specs:
        total *= spec.downsampling_factor
        if total > 1:
            base = rate / total
            m = 1
            while m * base <= rate / 2:
                freqs.add(m * base)
                m += 1
    return sorted(freqs)


# toy training

@dataclass(frozen=True)
class TrainConfig:
    steps: int = 2000
    learning_rate: float = 2e-4
    loss: str = "L1"
    seed: int = 0
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    probe_samples: int = 4096
    probe_offset: float = 1.0

    def __post_init__(self):
        if self.steps < 0:
            raise ConfigError("steps must be >= 0")
        if not self.learning_rate >= 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.loss != "L1":
            raise ConfigError("only the L1 loss is supported")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")


def make_toy_dataset(stack: Stack, n_items: int = 8, n_samples: int = 64, seed: int = 0,
                     n_tones: int = 3, max_frequency: float | None = None,
                     max_offset: float = 0.5,
                     constant: float | None = None) -> list[tuple[Signal, Signal]]:
    """Band-limited sinusoid mixtures and their ideally upsampled targets.

    Each item sums ``n_tones`` sinusoids below ``max_frequency`` (default
    an eighth of the input rate) plus a constant drawn from
    ``[-max_offset, max_offset]``. Targets are evaluated analytically on
    the output grid of ``stack``, using its zero-phase alignment.
    ``constant`` replaces the mixtures with a constant signal.
    """
    rng = SplitMix64(seed)
    rate = stack.input_rate
    f_hi = max_frequency if max_frequency is not None else rate / 8
    n_out = output_length(stack, n_samples)
    scale, offset = alignment(stack)
    t_in = np.arange(n_samples) / rate
    t_out = (np.arange(n_out) - offset) / scale / rate
    data = []
    for _ in range(n_items):
        if constant is not None:
            data.append((Signal(np.full(n_samples, constant), rate),
                         Signal(np.full(n_out, constant), stack.output_rate)))
            continue
        freqs = rng.uniform(0.0, f_hi, n_tones)
        amps = rng.uniform(0.2, 1.0, n_tones) / n_tones
        phases = rng.uniform(0, 2 * np.pi, n_tones)
        dc = rng.uniform(-max_offset, max_offset, 1)[0]

        def s(t):
            return dc + np.sum(amps[:, None] * np.sin(2 * np.pi * freqs[:, None] * t + phases[:, None]), axis=0)

        data.append((Signal(s(t_in), rate), Signal(s(t_out), stack.output_rate)))
    return data


@dataclass
class TrainResult:
    stack: Stack
    losses: list[float]
    pre_report: object
    post_report: object
    pre_prominence: float
    post_prominence: float


def _loss_and_grads(stack, dataset):
    total = 0.0
    grads = None
    for x, target in dataset:
        tape = Tape()
        y = forward_stack(tape, tape.input(x.samples, requires_grad=False), stack)
        loss = tape.l1_loss(y, target.samples)
        g = tape.backward(loss)
        total += float(loss.value)
        grads = g if grads is None else {k: grads[k] + g[k] for k in grads}
    n = len(dataset)
    return total / n, {k: v / n for k, v in (grads or {}).items()}


def dataset_loss(stack: Stack, dataset) -> float:
    total = 0.0
    for x, target in dataset:
        y = apply_stack(x, stack)[-1].samples
        total += float(np.abs(y - target.samples).mean())
    return total / len(dataset)


def probe_report(stack: Stack, cfg: TrainConfig, analysis=None):
    """Artifact report of ``stack`` on held-out offset white noise, plus peak tone prominence."""
    from .artifacts import AnalysisConfig, analyze_spectrogram, predict_tones, tone_prominence

    analysis = analysis or AnalysisConfig()
    probe = white_noise(cfg.probe_samples, stack.input_rate, cfg.seed ^ 0xA5A5A5A5,
                        offset=cfg.probe_offset, channels=stack.in_channels)
    spec = stft(apply_stack(probe, stack)[-1], analysis.stft)
    preds = predict_tones(stack)
    report = analyze_spectrogram(spec, preds, analysis)
    prom = max((tone_prominence(spec, t.frequency, analysis.match_tolerance_bins,
                                analysis.neighbourhood) for t in preds), default=float("-inf"))
    return report, prom


def train_toy(stack: Stack, dataset, cfg: TrainConfig | None = None, analysis=None) -> TrainResult:
    """Fit the stack's learnable kernels to ``dataset`` with full-batch L1 descent.

    Returns the trained stack, the loss before each step (plus the final
    loss), and artifact reports on held-out noise before and after.
    Raises :class:`TrainingDivergedError` if the loss stops being finite.
    """
    cfg = cfg or TrainConfig()
    if not dataset:
        raise ConfigError("dataset is empty")
    pre_report, pre_prom = probe_report(stack, cfg, analysis)
    params = stack_params(stack)
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(v) for k, v in params.items()}
    losses = []
    current = stack
    for step in range(1, cfg.steps + 1):
        loss, grads = _loss_and_grads(current, dataset)
        if not math.isfinite(loss):
            raise TrainingDivergedError(step - 1, loss)
        losses.append(loss)
        for name, g in grads.items():
            if cfg.optimizer == "sgd":
                params[name] = params[name] - cfg.learning_rate * g
                continue
            m[name] = cfg.beta1 * m[name] + (1 - cfg.beta1) * g
            v[name] = cfg.beta2 * v[name] + (1 - cfg.beta2) * g * g
            mhat = m[name] / (1 - cfg.beta1 ** step)
            vhat = v[name] / (1 - cfg.beta2 ** step)
            params[name] = params[name] - cfg.learning_rate * mhat / (np.sqrt(vhat) + cfg.eps)
        if not all(np.all(np.isfinite(p)) for p in params.values()):
            raise TrainingDivergedError(step, float("nan"))
        current = stack_from_params(stack, params)
    final = dataset_loss(current, dataset)
    if not math.isfinite(final):
        raise TrainingDivergedError(cfg.steps, final)
    losses.append(final)
    if cfg.steps == 0:
        post_report, post_prom = pre_report, pre_prom
    else:
        post_report, post_prom = probe_report(current, cfg, analysis)
    return TrainResult(current, losses, pre_report, post_report, pre_prom, post_prom)
