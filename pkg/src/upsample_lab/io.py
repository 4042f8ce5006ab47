"""File formats: WAV, headerless CSV, PGM spectrogram images, stack JSON, weight blobs.

Stack JSON schema::

    {
      "input_rate": 4000,
      "seed": 0,
      "layers": [
        {"kind": "TransposedConv", "length": 8, "stride": 4, "factor": 1,
         "init": {"type": "RandomUniform"}, "seed": null,
         "use_bias": false, "bias_value": null, "activation": "None",
         "in_channels": 1, "out_channels": 1, "mode": "nearest"}
      ]
    }

``init`` may also be ``{"type": "Constant", "value": 1.0}`` or
``{"type": "ICNR"}``. Omitted layer fields take their defaults. A stack
file describes the architecture; kernels are realised from the seeds, or
loaded from a weight blob written next to it.

Weight blob: for each layer with a kernel, in order, the weights as
little-endian float64 in (out, in, length) C order, followed by the bias
when present.
"""
from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import ConfigError, ShapeError
from .layers import LayerSpec, Stack, build_stack
from .signal import Kernel, Signal
from .spectral import Spectrogram


# WAV

def read_wav(path) -> Signal:
    """Read PCM16 or float32 WAV; PCM is scaled to [-1, 1)."""
    try:
        rate, data = wavfile.read(path)
    except (ValueError, OSError) as exc:
        raise ConfigError(f"cannot read WAV {path}: {exc}") from exc
    if data.dtype == np.int16:
        arr = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32 or data.dtype == np.float64:
        arr = data.astype(np.float64)
    elif data.dtype == np.int32:
        arr = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.uint8:
        arr = (data.astype(np.float64) - 128.0) / 128.0
    else:
        raise ConfigError(f"unsupported WAV sample type {data.dtype}")
    arr = arr.T if arr.ndim == 2 else arr[np.newaxis, :]
    return Signal(arr, int(rate))


def write_wav(path, x: Signal, fmt: str = "float32") -> None:
    """Write ``x`` as little-endian ``float32`` or ``pcm16`` WAV."""
    data = x.samples.T
    if fmt == "float32":
        out = data.astype("<f4")
    elif fmt == "pcm16":
        out = np.clip(np.round(data * 32768.0), -32768, 32767).astype("<i2")
    else:
        raise ConfigError(f"unknown WAV format {fmt!r}")
    if out.shape[1] == 1:
        out = out[:, 0]
    wavfile.write(path, x.sample_rate, out)


# CSV

def _fmt(v: float) -> str:
    return repr(float(v))


def write_signal_csv(path, x) -> None:
    """One row per channel, no header, full float64 precision."""
    arr = x.samples if isinstance(x, Signal) else np.atleast_2d(np.asarray(x, dtype=np.float64))
    with open(path, "w", newline="\n") as fh:
        for row in arr:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_signal_csv(path, sample_rate: int) -> Signal:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(v) for v in line.split(",")])
    if not rows or len({len(r) for r in rows}) != 1:
        raise ShapeError(f"{path}: rows must be non-empty and equally long")
    return Signal(np.array(rows), sample_rate)


def write_spectrogram_csv(path, spec: Spectrogram) -> None:
    """Frequency rows (ascending) by frame columns, dB with 4 decimals."""
    with open(path, "w", newline="\n") as fh:
        for row in spec.magnitudes_db:
            fh.write(",".join(f"{v:.4f}" for v in row) + "\n")


def spectrogram_to_pgm_bytes(spec: Spectrogram) -> bytes:
    """8-bit binary PGM: [floor_db, max] maps linearly to [0, 255], low frequencies at the bottom."""
    db = spec.magnitudes_db
    top = float(db.max())
    span = top - spec.floor_db
    if span <= 0:
        img = np.zeros_like(db, dtype=np.uint8)
    else:
        img = np.round((db - spec.floor_db) / span * 255.0).clip(0, 255).astype(np.uint8)
    img = img[::-1]
    h, w = img.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + img.tobytes()


def write_spectrogram_pgm(path, spec: Spectrogram) -> None:
    Path(path).write_bytes(spectrogram_to_pgm_bytes(spec))


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ConfigError(f"{path} is not a binary PGM")
    w, h = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)


def write_loss_csv(path, losses) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("step,loss\n")
        for i, v in enumerate(losses):
            fh.write(f"{i},{_fmt(v)}\n")


# JSON

def dump_json(path, obj) -> None:
    """Deterministic JSON: sorted keys, fixed indentation, trailing newline."""
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def stack_to_dict(stack: Stack, seed: int | None = None) -> dict:
    d = {"input_rate": stack.input_rate, "layers": [s.to_dict() for s in stack.specs]}
    if seed is not None:
        d["seed"] = seed
    return d


def stack_from_dict(d: dict, seed: int | None = None) -> Stack:
    if not isinstance(d, dict) or "layers" not in d or "input_rate" not in d:
        raise ConfigError("stack JSON needs 'input_rate' and 'layers'")
    if not isinstance(d["layers"], list):
        raise ConfigError("'layers' must be a list")
    specs = [LayerSpec.from_dict(layer) for layer in d["layers"]]
    s = seed if seed is not None else int(d.get("seed", 0))
    return build_stack(specs, int(d["input_rate"]), s)


def load_stack(path, seed: int | None = None) -> Stack:
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read stack JSON {path}: {exc}") from exc
    stack = stack_from_dict(d, seed)
    blob = d.get("weights")
    if blob:
        stack = read_weights(Path(path).parent / blob, stack)
    return stack


def save_stack(path, stack: Stack, seed: int | None = None, weights: bool = False) -> list[Path]:
    """Write the stack JSON, and optionally the raw weight blob beside it."""
    path = Path(path)
    d = stack_to_dict(stack, seed)
    written = []
    if weights:
        blob = path.with_suffix(".weights.bin")
        write_weights(blob, stack)
        d["weights"] = blob.name
        written.append(blob)
    dump_json(path, d)
    return [path] + written


def write_weights(path, stack: Stack) -> None:
    chunks = []
    for layer in stack.layers:
        if layer.kernel is None:
            continue
        chunks.append(np.ascontiguousarray(layer.kernel.weights, dtype="<f8").tobytes())
        if layer.kernel.bias is not None:
            chunks.append(np.ascontiguousarray(layer.kernel.bias, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def read_weights(path, stack: Stack) -> Stack:
    raw = np.frombuffer(Path(path).read_bytes(), dtype="<f8")
    pos = 0
    kernels = []
    for layer in stack.layers:
        if layer.kernel is None:
            kernels.append(None)
            continue
        shape = layer.kernel.weights.shape
        n = int(np.prod(shape))
        w = raw[pos:pos + n].reshape(shape)
        pos += n
        b = None
        if layer.kernel.bias is not None:
            b = raw[pos:pos + shape[0]]
            pos += shape[0]
        kernels.append(Kernel(w, b))
    if pos != raw.size:
        raise ShapeError(f"weight blob has {raw.size} values, stack needs {pos}")
    return stack.with_kernels(kernels)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()


def relpath(path, base) -> str:
    return os.path.relpath(path, base).replace(os.sep, "/")
