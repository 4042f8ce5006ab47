"""Command-line front end.

Exit codes: 0 success (clean analysis), 2 tonal artifacts found by
``analyze``, 1 usage or I/O error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from . import io as uio
from .artifacts import AnalysisConfig, analyze_spectrogram, predict_tones
from .errors import UpsampleLabError
from .figures import EXPERIMENTS, FIGURE_IDS, FigureJob, run_experiment, run_figure, write_manifest, _timestamp
from .layers import apply_stack
from .signal import Signal
from .spectral import StftConfig, stft

EXIT_OK, EXIT_ERROR, EXIT_TONAL = 0, 1, 2
SEED_ENV = "UPSAMPLE_LAB_SEED"


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UpsampleLabError(f"{SEED_ENV} must be an integer, got {env!r}")


def _analysis(args) -> AnalysisConfig:
    return AnalysisConfig(
        stft=StftConfig(n_fft=args.nfft, hop=args.hop, center=args.center),
        min_prominence_db=args.prominence_db,
        channel=getattr(args, "channel", 0),
    )


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help=f"RNG seed (fallback: ${SEED_ENV}, then 0)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--nfft", type=int, default=2048)
    p.add_argument("--hop", type=int, default=512)
    p.add_argument("--center", action="store_true", help="centre STFT frames (reflect padding)")
    p.add_argument("--prominence-db", type=float, default=10.0, dest="prominence_db")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which would read as "artifacts found"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="upsample-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    fig = sub.add_parser("figure", help="reproduce a figure as spectrogram data")
    fig.add_argument("figure_id", choices=FIGURE_IDS)
    fig.add_argument("--format", choices=("csv", "pgm", "both"), default="both")
    fig.add_argument("--jobs", type=int, default=1, help="threads for per-layer analysis")
    _common(fig)

    ana = sub.add_parser("analyze", help="run a stack on a WAV file and report artifacts")
    ana.add_argument("input", type=Path, help="WAV file (PCM16 or float32)")
    ana.add_argument("stack", type=Path, help="stack JSON")
    ana.add_argument("--channel", type=int, default=0, help="channel to analyse")
    ana.add_argument("--spectrograms", action="store_true", help="also write per-layer spectrograms")
    ana.add_argument("--format", choices=("csv", "pgm", "both"), default="both")
    _common(ana)

    exp = sub.add_parser("experiment", help="run a named experiment")
    exp.add_argument("name", choices=EXPERIMENTS)
    exp.add_argument("config", nargs="?", type=Path, default=None, help="optional JSON settings")
    exp.add_argument("--stride", type=int, default=None, help="critic stride (gradient)")
    exp.add_argument("--steps", type=int, default=None, help="training steps (training)")
    _common(exp)
    return parser


def cmd_figure(args) -> int:
    job = FigureJob(args.figure_id, _seed(args), args.out, args.format, _analysis(args), args.jobs)
    written = run_figure(job)
    print(f"wrote {len(written)} files to {args.out}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    started = _timestamp()
    seed = _seed(args)
    x = uio.read_wav(args.input)
    stack = uio.load_stack(args.stack, seed=args.seed)
    if stack.input_rate != x.sample_rate:
        raise UpsampleLabError(f"WAV is {x.sample_rate} Hz but the stack expects {stack.input_rate} Hz")
    cfg = _analysis(args)
    if not 0 <= cfg.channel < x.channels:
        raise UpsampleLabError(f"channel {cfg.channel} out of range for {x.channels}-channel input")
    if stack.layers and stack.in_channels == 1 and x.channels > 1:
        x = Signal(x.samples[cfg.channel], x.sample_rate)
        cfg = replace(cfg, channel=0)
    outs = apply_stack(x, stack)
    args.out.mkdir(parents=True, exist_ok=True)
    written = []
    if args.spectrograms:
        for k, sig in enumerate(outs):
            if sig.time < cfg.stft.n_fft and not cfg.stft.center:
                continue
            spec = stft(sig, cfg.stft, channel=cfg.channel if k == 0 else 0)
            stem = args.out / f"layer{k}"
            if args.format in ("csv", "both"):
                uio.write_spectrogram_csv(stem.with_suffix(".csv"), spec)
                written.append(stem.with_suffix(".csv"))
            if args.format in ("pgm", "both"):
                uio.write_spectrogram_pgm(stem.with_suffix(".pgm"), spec)
                written.append(stem.with_suffix(".pgm"))
    final = outs[-1]
    spec = stft(final, cfg.stft, channel=cfg.channel if len(outs) == 1 else 0)
    report = analyze_spectrogram(spec, predict_tones(stack) if stack.layers else [], cfg)
    path = args.out / "report.json"
    uio.dump_json(path, report.to_dict())
    written.append(path)
    write_manifest(args.out, "analyze", seed, {"stack": uio.stack_to_dict(stack), "analysis": cfg.to_dict()},
                   [args.input, args.stack], written, started)
    v = report.to_dict()["verdicts"]
    print(f"tonal={str(v['tonal']).lower()} filtering={str(v['filtering']).lower()} peaks={len(report.tonal_peaks)}")
    return EXIT_TONAL if report.tonal else EXIT_OK


def cmd_experiment(args) -> int:
    overrides = {}
    if args.config is not None:
        try:
            overrides = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UpsampleLabError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(overrides, dict):
            raise UpsampleLabError("experiment config must be a JSON object")
    if args.stride is not None:
        overrides["stride"] = args.stride
    if args.steps is not None:
        overrides["steps"] = args.steps
    written, summary = run_experiment(args.name, args.out, _seed(args), overrides, _analysis(args), args.config)
    keys = [k for k in summary if not isinstance(summary[k], (dict, list))]
    print(" ".join(f"{k}={summary[k]}" for k in keys))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {"figure": cmd_figure, "analyze": cmd_analyze, "experiment": cmd_experiment}[args.command]
    try:
        return handler(args)
    except (UpsampleLabError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
