"""Figure recipes and named experiments, writing CSV/PGM/JSON plus a run manifest.

Each figure maps to a fixed stack and input recipe. The music excerpt used
for the interpolation figure is replaced by :func:`harmonic_signal`, a
synthetic harmonic tone labelled ``synthetic_music`` in every output.
"""
from __future__ import annotations

import datetime as _dt
import os
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import io as uio
from .artifacts import AnalysisConfig, analyze_spectrogram, compare_offset, detect_tonal_peaks, predict_tones
from .autodiff import (TrainConfig, gradient_spectrum, make_toy_dataset, predict_gradient_tones,
                       train_toy)
from .errors import ConfigError
from .layers import Init, LayerSpec, apply_stack, build_stack, strip_offsets
from .ops import transposed_conv1d
from .signal import Kernel, harmonic_signal, ones, white_noise
from .spectral import stft

FIGURE_IDS = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10")
EXPERIMENTS = ("offset", "gradient", "training")
INPUT_RATE = 4000


@dataclass(frozen=True)
class FigureJob:
    figure_id: str
    seed: int = 0
    out_dir: Path = Path("out")
    fmt: str = "both"
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    jobs: int = 1

    def __post_init__(self):
        if self.figure_id not in FIGURE_IDS:
            raise ConfigError(f"unknown figure {self.figure_id!r}; choose from {', '.join(FIGURE_IDS)}")
        if self.fmt not in ("csv", "pgm", "both"):
            raise ConfigError(f"unknown format {self.fmt!r}")


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        now = _dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc)
    else:
        now = _dt.datetime.now(_dt.timezone.utc)
    return now.replace(microsecond=0).isoformat()


def write_manifest(out_dir: Path, command: str, seed: int, config: dict, inputs, outputs,
                   started: str) -> Path:
    """Record tool version, seed, config hash and hashed inputs/outputs in ``manifest.json``."""
    out_dir = Path(out_dir)
    entry = lambda p: {"path": uio.relpath(p, out_dir), "sha256": uio.sha256_file(p)}
    manifest = {
        "tool": "upsample-lab",
        "version": __version__,
        "command": command,
        "seed": seed,
        "config": config,
        "config_hash": uio.config_hash(config),
        "inputs": [{"path": str(p), "sha256": uio.sha256_file(p)} for p in inputs],
        "outputs": [entry(p) for p in sorted(outputs, key=str)],
        "started_at": started,
        "finished_at": _timestamp(),
    }
    path = out_dir / "manifest.json"
    uio.dump_json(path, manifest)
    return path


# figure recipes: (variant name, stack, input signal, stft center flag)

def _tconv(length, stride, init=None, **kw):
    return LayerSpec("TransposedConv", length=length, stride=stride, init=init or Init(), **kw)


def _demucs_like(kind: str, seed: int):
    if kind == "transposed":
        first = _tconv(8, 4, use_bias=True, bias_value=0.1, activation="ReLU")
        rest = _tconv(8, 4, use_bias=True, bias_value=0.1)
    else:
        first = LayerSpec("SubpixelConv", length=8, factor=4, use_bias=True, bias_value=0.1, activation="ReLU")
        rest = LayerSpec("SubpixelConv", length=8, factor=4, use_bias=True, bias_value=0.1)
    return build_stack([first, rest, rest], INPUT_RATE, seed)


def _recipes(fig: str, seed: int):
    n = 8192
    noise = white_noise(n, INPUT_RATE, seed)
    ones_in = ones(n, INPUT_RATE)
    C1 = Init.constant(1.0)
    if fig == "fig2":
        return [("random", build_stack([_tconv(3, 3)], INPUT_RATE, seed), ones_in, False)]
    if fig == "fig3":
        return [("constant", build_stack([_tconv(3, 2, C1)], INPUT_RATE, seed), ones_in, False)]
    if fig == "fig4":
        return [("constant", build_stack([_tconv(3, 1, C1)], INPUT_RATE, seed), ones_in, False)]
    if fig == "fig5":
        return [
            ("partial_constant", build_stack([_tconv(3, 2, C1)], INPUT_RATE, seed), ones_in, False),
            ("partial_random", build_stack([_tconv(3, 2)], INPUT_RATE, seed), ones_in, False),
            ("full_constant", build_stack([_tconv(4, 2, C1)], INPUT_RATE, seed), ones_in, False),
            ("full_random", build_stack([_tconv(4, 2)], INPUT_RATE, seed), ones_in, False),
        ]
    if fig == "fig6":
        music = harmonic_signal(n, INPUT_RATE, seed)
        out = []
        for mode in ("nearest", "linear"):
            spec = LayerSpec("InterpPlusConv", length=9, factor=2, mode=mode)
            stack = build_stack([spec] * 3, INPUT_RATE, seed)
            out.append((f"{mode}_synthetic_music", stack, music, False))
            out.append((f"{mode}_white_noise", stack, noise, False))
        return out
    if fig == "fig7":
        spec = LayerSpec("SubpixelConv", length=3, factor=2)
        icnr = LayerSpec("SubpixelConv", length=3, factor=2, init=Init("ICNR"))
        return [("random", build_stack([spec] * 3, INPUT_RATE, seed), ones_in, False),
                ("icnr", build_stack([icnr] * 3, INPUT_RATE, seed), ones_in, False)]
    if fig == "fig8":
        lin = LayerSpec("LinearUpsample", factor=2)
        return [("transposed_ones", build_stack([_tconv(4, 2)] * 3, INPUT_RATE, seed), ones_in, False),
                ("linear_white_noise", build_stack([lin] * 3, INPUT_RATE, seed), noise, False)]
    if fig == "fig9":
        short = white_noise(1024, INPUT_RATE, seed)
        out = []
        for kind in ("transposed", "subpixel"):
            orig = _demucs_like(kind, seed)
            out.append((f"{kind}_original", orig, short, False))
            out.append((f"{kind}_modified", strip_offsets(orig), short, False))
        return out
    if fig == "fig10":
        stack = build_stack([_tconv(4, 2)] * 3, INPUT_RATE, seed)
        return [("center_false", stack, ones_in, False), ("center_true", stack, ones_in, True)]
    raise ConfigError(f"unknown figure {fig!r}")


def _small_vectors(fig: str, seed: int):
    """Exact outputs of the single-layer figures on short ones inputs."""
    recipes = {"fig2": ("random", 4), "fig3": ("constant", 4), "fig4": ("constant", 5)}
    rows = []
    if fig in recipes:
        variant, n = recipes[fig]
        stack = _recipes(fig, seed)[0][1]
        rows.append((variant, stack))
        length = n
    elif fig == "fig5":
        rows = [(name, stack) for name, stack, _, _ in _recipes(fig, seed)]
        length = 8
    else:
        return []
    out = []
    for name, stack in rows:
        layer = stack.layers[0]
        y = transposed_conv1d(np.ones((1, length)), Kernel(layer.kernel.weights), layer.spec.stride)
        out.append((name, y[0]))
    return out


def run_figure(job: FigureJob) -> list[Path]:
    """Write per-layer spectrograms, an artifact report, and (fig2-fig5) exact vectors."""
    started = _timestamp()
    out_dir = Path(job.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fig = job.figure_id
    written: list[Path] = []
    reports = {}
    tasks = []
    recipes = _recipes(fig, job.seed)
    for variant, stack, x, center in recipes:
        outs = apply_stack(x, stack)
        cfg = job.analysis
        stft_cfg = replace(cfg.stft, center=True) if center else cfg.stft
        for k, sig in enumerate(outs):
            tasks.append((variant, k, sig, stft_cfg, len(outs) - 1))
        reports[variant] = {"stack": uio.stack_to_dict(stack, job.seed), "layers": {},
                            "predictions": [t.__dict__ for t in predict_tones(stack)],
                            "input": "synthetic_music" if "music" in variant else
                                     ("white_noise" if "noise" in variant or fig == "fig9" else "ones")}

    def analyse(task):
        variant, k, sig, stft_cfg, last = task
        if sig.time < stft_cfg.n_fft and not stft_cfg.center:
            return task, None, None
        spec = stft(sig, stft_cfg)
        stack = next(s for v, s, _, _ in recipes if v == variant)
        preds = predict_tones(stack) if k == last else []
        return task, spec, analyze_spectrogram(spec, preds, job.analysis)

    if job.jobs > 1:
        with ThreadPoolExecutor(max_workers=job.jobs) as pool:
            results = list(pool.map(analyse, tasks))
    else:
        results = [analyse(t) for t in tasks]

    for (variant, k, sig, stft_cfg, last), spec, report in results:
        key = f"layer{k}"
        entry = {"sample_rate": sig.sample_rate, "samples": sig.time}
        if spec is None:
            entry["skipped"] = f"shorter than n_fft={stft_cfg.n_fft}"
        else:
            entry.update({"frames": spec.n_frames, "center": stft_cfg.center})
            entry["report"] = report.to_dict()
            stem = out_dir / f"{fig}_{variant}_{key}"
            if job.fmt in ("csv", "both"):
                uio.write_spectrogram_csv(stem.with_suffix(".csv"), spec)
                written.append(stem.with_suffix(".csv"))
            if job.fmt in ("pgm", "both"):
                uio.write_spectrogram_pgm(stem.with_suffix(".pgm"), spec)
                written.append(stem.with_suffix(".pgm"))
        reports[variant]["layers"][key] = entry

    if fig == "fig9":
        pairs = {}
        for kind in ("transposed", "subpixel"):
            orig = next(s for v, s, _, _ in recipes if v == f"{kind}_original")
            mod = next(s for v, s, _, _ in recipes if v == f"{kind}_modified")
            x = next(xx for v, _, xx, _ in recipes if v == f"{kind}_original")
            pairs[kind] = compare_offset(orig, mod, x, job.analysis).to_dict()
        reports["offset_comparison"] = pairs

    for name, vec in _small_vectors(fig, job.seed):
        path = out_dir / f"{fig}_{name}_vector.csv"
        uio.write_signal_csv(path, vec)
        written.append(path)

    report_path = out_dir / f"{fig}_report.json"
    uio.dump_json(report_path, {"figure": fig, "seed": job.seed, "variants": reports})
    written.append(report_path)
    config = {"figure": fig, "format": job.fmt, "analysis": job.analysis.to_dict()}
    written.append(write_manifest(out_dir, f"figure {fig}", job.seed, config, [], written, started))
    return written


# experiments

OFFSET_DEFAULTS = {"seeds": 20, "n_samples": 1024, "bias": 0.1, "length": 8, "stride": 4, "layers": 3}
GRADIENT_DEFAULTS = {"stride": 4, "length": 8, "layers": 2, "channels": 4, "sample_rate": 16000,
                     "n_samples": 32768}
TRAINING_DEFAULTS = {"steps": 2000, "learning_rate": 2e-4, "hidden_channels": 4, "length": 8, "stride": 4,
                     "n_items": 8, "n_samples": 64, "optimizer": "adam"}


def offset_experiment(cfg: dict, seed: int, analysis: AnalysisConfig):
    """Bias+ReLU stack vs. its offset-free twin on zero-mean noise, per seed."""
    rows = []
    for i in range(cfg["seeds"]):
        s = seed + i
        first = _tconv(cfg["length"], cfg["stride"], use_bias=True, bias_value=cfg["bias"], activation="ReLU")
        rest = _tconv(cfg["length"], cfg["stride"], use_bias=True, bias_value=cfg["bias"])
        with_off = build_stack([first] + [rest] * (cfg["layers"] - 1), INPUT_RATE, s)
        cmp = compare_offset(with_off, strip_offsets(with_off), white_noise(cfg["n_samples"], INPUT_RATE, s),
                             analysis)
        rows.append({"seed": s, "offset_delta_db": round(cmp.offset_delta_db(), 6),
                     "tonal_with": cmp.report_with.tonal, "tonal_without": cmp.report_without.tonal,
                     "comparison": cmp.to_dict()})
    deltas = [r["offset_delta_db"] for r in rows]
    flips = sum(1 for r in rows if r["tonal_with"] and not r["tonal_without"])
    return {"median_offset_delta_db": statistics.median(deltas), "verdict_flips": flips,
            "n_seeds": len(rows), "runs": rows}


def gradient_critic(cfg: dict, seed: int):
    first = LayerSpec("PlainConv", length=cfg["length"], stride=cfg["stride"],
                      out_channels=cfg["channels"], activation="ReLU")
    rest = LayerSpec("PlainConv", length=cfg["length"], stride=cfg["stride"], in_channels=cfg["channels"],
                     out_channels=cfg["channels"], activation="ReLU")
    last = LayerSpec("PlainConv", length=cfg["length"], stride=cfg["stride"], in_channels=cfg["channels"])
    specs = [first] + [rest] * (cfg["layers"] - 2) + [last] if cfg["layers"] > 1 else \
        [LayerSpec("PlainConv", length=cfg["length"], stride=cfg["stride"])]
    return build_stack(specs, cfg["sample_rate"], seed)


def gradient_experiment(cfg: dict, seed: int, analysis: AnalysisConfig):
    critic = gradient_critic(cfg, seed)
    x = white_noise(cfg["n_samples"], cfg["sample_rate"], seed)
    spec = gradient_spectrum(critic, x, analysis.stft)
    peaks = detect_tonal_peaks(spec, analysis.min_prominence_db, analysis.neighbourhood)
    predicted = predict_gradient_tones(critic)
    peak_bins = [spec.bin_of(f) for f, _ in peaks]
    matched = [{"frequency_hz": f, "matched": any(abs(spec.bin_of(f) - b) <= analysis.match_tolerance_bins
                                                   for b in peak_bins)} for f in predicted]
    stride_peaks = [p for p in peaks if any(abs(spec.bin_of(p[0]) - spec.bin_of(f)) <= 1 for f in predicted)]
    return spec, {"critic": uio.stack_to_dict(critic, seed),
                  "peaks": [{"frequency_hz": f, "prominence_db": round(p, 6)} for f, p in peaks],
                  "predicted": matched, "stride_peaks": len(stride_peaks)}


def training_stack(cfg: dict, seed: int):
    h = cfg["hidden_channels"]
    specs = [_tconv(cfg["length"], cfg["stride"], out_channels=h),
             _tconv(cfg["length"], cfg["stride"], in_channels=h)]
    return build_stack(specs, INPUT_RATE, seed)


def training_experiment(cfg: dict, seed: int, analysis: AnalysisConfig):
    stack = training_stack(cfg, seed)
    data = make_toy_dataset(stack, n_items=cfg["n_items"], n_samples=cfg["n_samples"], seed=seed + 1)
    tcfg = TrainConfig(steps=cfg["steps"], learning_rate=cfg["learning_rate"], seed=seed,
                       optimizer=cfg["optimizer"])
    return train_toy(stack, data, tcfg, analysis)


def run_experiment(name: str, out_dir, seed: int = 0, overrides: dict | None = None,
                   analysis: AnalysisConfig | None = None, config_path=None) -> tuple[list[Path], dict]:
    """Run a named experiment; returns written files and the summary dict."""
    started = _timestamp()
    analysis = analysis or AnalysisConfig()
    defaults = {"offset": OFFSET_DEFAULTS, "gradient": GRADIENT_DEFAULTS, "training": TRAINING_DEFAULTS}
    if name not in defaults:
        raise ConfigError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    cfg = dict(defaults[name])
    unknown = set(overrides or {}) - set(cfg)
    if unknown:
        raise ConfigError(f"unknown {name} settings: {sorted(unknown)}")
    cfg.update(overrides or {})
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if name == "offset":
        summary = offset_experiment(cfg, seed, analysis)
        csv = out_dir / "offset_deltas.csv"
        with open(csv, "w", newline="\n") as fh:
            fh.write("seed,offset_delta_db,tonal_with,tonal_without\n")
            for r in summary["runs"]:
                fh.write(f"{r['seed']},{r['offset_delta_db']},{int(r['tonal_with'])},{int(r['tonal_without'])}\n")
        written.append(csv)
        path = out_dir / "offset_report.json"
    elif name == "gradient":
        spec, summary = gradient_experiment(cfg, seed, analysis)
        for suffix, writer in ((".csv", uio.write_spectrogram_csv), (".pgm", uio.write_spectrogram_pgm)):
            p = out_dir / f"gradient_spectrogram{suffix}"
            writer(p, spec)
            written.append(p)
        path = out_dir / "gradient_report.json"
    else:
        res = training_experiment(cfg, seed, analysis)
        loss_csv = out_dir / "loss_curve.csv"
        uio.write_loss_csv(loss_csv, res.losses)
        written.append(loss_csv)
        written += uio.save_stack(out_dir / "trained_stack.json", res.stack, seed, weights=True)
        summary = {"initial_loss": res.losses[0], "final_loss": res.losses[-1],
                   "loss_ratio": res.losses[-1] / res.losses[0],
                   "pre_max_prominence_db": round(res.pre_prominence, 6),
                   "post_max_prominence_db": round(res.post_prominence, 6),
                   "pre_report": res.pre_report.to_dict(), "post_report": res.post_report.to_dict()}
        path = out_dir / "training_report.json"
    uio.dump_json(path, {"experiment": name, "seed": seed, "config": cfg, **summary})
    written.append(path)
    inputs = [config_path] if config_path else []
    written.append(write_manifest(out_dir, f"experiment {name}", seed,
                                  {"experiment": name, **cfg, "analysis": analysis.to_dict()},
                                  inputs, written, started))
    return written, summary
