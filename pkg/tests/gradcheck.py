"""Central finite-difference checks for stacks on the tape."""
from __future__ import annotations

import numpy as np

from upsample_lab import LayerSpec, build_stack
from upsample_lab.autodiff import Tape, forward_stack, stack_from_params, stack_params

EPS = 1e-6
RTOL = 1e-5
ATOL = 1e-7
KINK_MARGIN = 1e-3

LAYER_KINDS = ("TransposedConv", "PlainConv", "NearestUpsample", "LinearUpsample", "InterpPlusConv",
               "SubpixelConv")


def random_case(rng: np.random.Generator, kind: str):
    """One small random stack (kind, optionally followed by a transposed layer) with input and L1 target."""
    c_in = int(rng.integers(1, 3))
    c_mid = int(rng.integers(1, 3))
    L = int(rng.integers(1, 4))
    s = int(rng.integers(1, 4))
    r = int(rng.integers(1, 4))
    bias = bool(rng.integers(0, 2))
    relu = bool(rng.integers(0, 2))
    act = "ReLU" if relu else None
    if kind in ("NearestUpsample", "LinearUpsample"):
        first = LayerSpec(kind, factor=r, in_channels=c_in, out_channels=c_in)
        c_mid = c_in
    elif kind == "PlainConv":
        first = LayerSpec(kind, length=L, stride=s, in_channels=c_in, out_channels=c_mid, use_bias=bias,
                          activation=act)
    else:
        first = LayerSpec(kind, length=L, stride=s, factor=r, in_channels=c_in, out_channels=c_mid,
                          use_bias=bias, activation=act, mode=("nearest", "linear")[int(rng.integers(0, 2))])
    second = LayerSpec("TransposedConv", length=int(rng.integers(1, 4)), stride=int(rng.integers(1, 3)),
                       in_channels=c_mid, out_channels=1, use_bias=True)
    specs = [first, second] if rng.integers(0, 2) else [first]
    stack = build_stack(specs, 12, int(rng.integers(0, 2**32)))
    T = int(rng.integers(max(L, 3), 9))
    x = rng.normal(size=(c_in, T))
    return stack, x


def _forward(stack, x, target=None):
    tape = Tape()
    xt = tape.input(x)
    y = forward_stack(tape, xt, stack)
    return tape, xt, y, target


def make_target(stack, x, rng):
    """Target offset at least 0.5 away from the output, so |y - t| stays smooth."""
    _, _, y, _ = _forward(stack, x)
    sign = np.where(rng.random(y.value.shape) < 0.5, -1.0, 1.0)
    return y.value + sign * rng.uniform(0.5, 1.0, y.value.shape)


def near_kink(stack, x) -> bool:
    tape, _, _, _ = _forward(stack, x)
    for rec in tape.records:
        if rec.op == "relu" and np.min(np.abs(rec.inputs[0].value)) < KINK_MARGIN:
            return True
    return False


def loss_value(stack, x, target) -> float:
    tape, _, y, _ = _forward(stack, x)
    return float(tape.l1_loss(y, target).value)


def analytic(stack, x, target):
    tape, xt, y, _ = _forward(stack, x)
    grads = tape.backward(tape.l1_loss(y, target))
    return {k: v.copy() for k, v in grads.items()}, xt.grad.copy()


def check_case(stack, x, target) -> tuple[bool, float, int]:
    """Return (ok, worst scaled error, number of checked entries)."""
    p_grads, x_grad = analytic(stack, x, target)
    params = stack_params(stack)
    worst = 0.0
    n = 0

    def compare(a, num):
        nonlocal worst, n
        err = abs(a - num) / (ATOL + RTOL * abs(num))
        worst = max(worst, err)
        n += 1

    for name, value in params.items():
        for idx in np.ndindex(value.shape):
            plus = {k: v.copy() for k, v in params.items()}
            minus = {k: v.copy() for k, v in params.items()}
            plus[name][idx] += EPS
            minus[name][idx] -= EPS
            num = (loss_value(stack_from_params(stack, plus), x, target)
                   - loss_value(stack_from_params(stack, minus), x, target)) / (2 * EPS)
            compare(p_grads[name][idx], num)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += EPS
        xm[idx] -= EPS
        num = (loss_value(stack, xp, target) - loss_value(stack, xm, target)) / (2 * EPS)
        compare(x_grad[idx], num)
    return worst <= 1.0, worst, n


def run_cases(n_per_kind: int, seed: int = 0):
    """Yield (kind, ok, worst, entries) for ``n_per_kind`` smooth random cases of every layer kind."""
    rng = np.random.default_rng(seed)
    for kind in LAYER_KINDS:
        done = 0
        while done < n_per_kind:
            stack, x = random_case(rng, kind)
            if near_kink(stack, x):
                continue
            target = make_target(stack, x, rng)
            ok, worst, n = check_case(stack, x, target)
            done += 1
            yield kind, ok, worst, n
