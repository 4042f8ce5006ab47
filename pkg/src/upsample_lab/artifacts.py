"""Predict where upsampling artifacts should appear and measure them in spectrograms.

Tone prediction is structural. A layer that raises the rate from ``R_in``
to ``R_out = r * R_in`` imprints period-``r`` patterns, i.e. a tone at
``R_out / r``. It also exposes images ``|m * R_in +/- f|`` of every tone
``f`` already present, up to the new Nyquist. Bias terms and ReLUs add a
zero-frequency offset whose images sit at multiples of each later layer's
input rate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .layers import Stack, apply_stack
from .signal import Signal
from .spectral import Spectrogram, StftConfig, stft


@dataclass(frozen=True)
class TonePrediction:
    frequency: float
    origin_layer: int
    kind: str  # "direct" | "replica" | "offset_replica"


def _has_offset(spec) -> bool:
    return spec.use_bias or spec.activation == "ReLU"


def predict_tones(stack: Stack) -> list[TonePrediction]:
    """Frequencies (Hz) at which the stack's structure predicts tonal artifacts.

    Sorted by frequency; each frequency appears once, attributed to the
    earliest layer that produces it.
    """
    rates = stack.rates()
    tones: dict[float, TonePrediction] = {}
    offset_seen = False

    def add(f, layer, kind, nyq):
        f = float(f)
        if 0 < f <= nyq and f not in tones:
            tones[f] = TonePrediction(f, layer, kind)

    for k, spec in enumerate(stack.specs):
        r_in, r_out = rates[k], rates[k + 1]
        nyq = r_out / 2
        if spec.downsampling_factor > 1:
            folded = {}
            for f, t in tones.items():
                g = math.fmod(f, r_out)
                g = min(g, r_out - g)
                if g > 0 and g not in folded:
                    folded[g] = TonePrediction(g, t.origin_layer, t.kind)
            tones = folded
        if spec.upsampling_factor > 1:
            existing = list(tones)
            m_max = int(nyq // r_in) + 1
            for f in existing:
                for m in range(1, m_max + 1):
                    add(abs(m * r_in - f), k, "replica", nyq)
                    add(m * r_in + f, k, "replica", nyq)
            add(r_in, k, "direct", nyq)
            if offset_seen:
                for m in range(1, m_max + 1):
                    add(m * r_in, k, "offset_replica", nyq)
        offset_seen = offset_seen or _has_offset(spec)
    return sorted(tones.values(), key=lambda t: t.frequency)


def _neighbourhood_median(avg: np.ndarray, half: int) -> np.ndarray:
    n = avg.size
    padded = np.concatenate([np.full(half, np.nan), avg, np.full(half, np.nan)])
    cols = [padded[half + o: half + o + n] for o in range(-half, half + 1) if o != 0]
    return np.nanmedian(np.stack(cols, axis=1), axis=1)


def prominence_profile(spec: Spectrogram, neighbourhood: int = 5) -> np.ndarray:
    """Frame-averaged dB of each bin minus the median of its +/- ``neighbourhood`` bins."""
    avg = spec.mean_db()
    return avg - _neighbourhood_median(avg, neighbourhood)


def detect_tonal_peaks(spec: Spectrogram, min_prominence_db: float = 10.0,
                       neighbourhood: int = 5) -> list[tuple[float, float]]:
    """Persistent narrowband ridges as ``(frequency_hz, prominence_db)``.

    A bin qualifies if it is a strict local maximum of the frame-averaged
    spectrum and rises ``min_prominence_db`` above the median of its
    neighbours (the bin itself excluded). The DC bin is never reported.
    Results are sorted by prominence, strongest first.
    """
    avg = spec.mean_db()
    prom = avg - _neighbourhood_median(avg, neighbourhood)
    left = np.concatenate([[-np.inf], avg[:-1]])
    right = np.concatenate([avg[1:], [-np.inf]])
    is_peak = (avg > left) & (avg > right) & (prom >= min_prominence_db)
    is_peak[0] = False
    idx = np.flatnonzero(is_peak)
    peaks = [(float(i * spec.bin_hz), float(prom[i])) for i in idx]
    return sorted(peaks, key=lambda p: (-p[1], p[0]))


def measure_filtering(spec: Spectrogram, n_bands: int = 8) -> list[float]:
    """Mean dB of each of ``n_bands`` equal bands relative to the full-band mean."""
    if n_bands < 2:
        raise ConfigError("n_bands must be >= 2")
    if spec.n_bins < n_bands:
        raise ConfigError(f"{spec.n_bins} frequency bins cannot fill {n_bands} bands")
    avg = spec.mean_db()
    overall = avg.mean()
    return [float(b.mean() - overall) for b in np.array_split(avg, n_bands)]


def band_energy_db(spec: Spectrogram, frequency: float, halfwidth: int = 1) -> float:
    """Mean power over frames summed in ``frequency`` +/- ``halfwidth`` bins, in dB."""
    b = spec.bin_of(frequency)
    lo, hi = max(b - halfwidth, 0), min(b + halfwidth, spec.n_bins - 1)
    power = 10.0 ** (spec.magnitudes_db[lo:hi + 1] / 10.0)
    return float(10.0 * np.log10(power.sum(axis=0).mean()))


def tone_prominence(spec: Spectrogram, frequency: float, tolerance_bins: int = 1,
                    neighbourhood: int = 5) -> float:
    """Largest prominence within ``tolerance_bins`` of ``frequency``."""
    prom = prominence_profile(spec, neighbourhood)
    b = spec.bin_of(frequency)
    lo, hi = max(b - tolerance_bins, 1), min(b + tolerance_bins, spec.n_bins - 1)
    return float(prom[lo:hi + 1].max())


@dataclass(frozen=True)
class AnalysisConfig:
    stft: StftConfig = field(default_factory=StftConfig)
    min_prominence_db: float = 10.0
    neighbourhood: int = 5
    n_bands: int = 8
    filtering_threshold_db: float = 6.0
    match_tolerance_bins: int = 1
    channel: int = 0

    def to_dict(self):
        s = self.stft
        return {
            "n_fft": s.n_fft, "hop": s.hop, "window": s.window, "center": s.center,
            "floor_db": s.floor_db, "min_prominence_db": self.min_prominence_db,
            "neighbourhood": self.neighbourhood, "n_bands": self.n_bands,
            "filtering_threshold_db": self.filtering_threshold_db,
            "match_tolerance_bins": self.match_tolerance_bins, "channel": self.channel,
        }


@dataclass
class ArtifactReport:
    tonal_peaks: list[tuple[float, float]]
    filtering_profile: list[float]
    predictions: list[tuple[TonePrediction, bool]]
    tonal: bool
    filtering: bool
    sample_rate: int
    config: AnalysisConfig = field(default_factory=AnalysisConfig)

    def to_dict(self) -> dict:
        nyq = self.sample_rate / 2
        n = len(self.filtering_profile)
        edges = np.linspace(0.0, nyq, n + 1)
        return {
            "sample_rate": self.sample_rate,
            "peaks": [{"frequency_hz": f, "prominence_db": round(p, 6)} for f, p in self.tonal_peaks],
            "bands": [{"low_hz": float(edges[i]), "high_hz": float(edges[i + 1]),
                       "relative_db": round(v, 6)} for i, v in enumerate(self.filtering_profile)],
            "predictions": [{"frequency_hz": t.frequency, "origin_layer": t.origin_layer,
                             "kind": t.kind, "matched": bool(m)} for t, m in self.predictions],
            "verdicts": {"tonal": bool(self.tonal), "filtering": bool(self.filtering)},
            "config": self.config.to_dict(),
        }

    @property
    def max_prominence(self) -> float:
        return max((p for _, p in self.tonal_peaks), default=float("-inf"))

    def unmatched(self) -> list[TonePrediction]:
        return [t for t, m in self.predictions if not m]


def analyze_spectrogram(spec: Spectrogram, predictions=(), cfg: AnalysisConfig | None = None) -> ArtifactReport:
    cfg = cfg or AnalysisConfig()
    peaks = detect_tonal_peaks(spec, cfg.min_prominence_db, cfg.neighbourhood)
    profile = measure_filtering(spec, cfg.n_bands)
    peak_bins = np.array([spec.bin_of(f) for f, _ in peaks], dtype=np.int64)
    matched = []
    for t in predictions:
        hit = peak_bins.size > 0 and np.min(np.abs(peak_bins - spec.bin_of(t.frequency))) <= cfg.match_tolerance_bins
        matched.append((t, bool(hit)))
    return ArtifactReport(
        tonal_peaks=peaks,
        filtering_profile=profile,
        predictions=matched,
        tonal=len(peaks) > 0,
        filtering=profile[-1] <= -cfg.filtering_threshold_db,
        sample_rate=spec.sample_rate,
        config=cfg,
    )


def analyze(x: Signal, stack: Stack | None = None, cfg: AnalysisConfig | None = None) -> ArtifactReport:
    """Run ``x`` through ``stack`` (if given) and report artifacts in the final output."""
    cfg = cfg or AnalysisConfig()
    if stack is None or not stack.layers:
        out, preds = x, []
    else:
        out, preds = apply_stack(x, stack)[-1], predict_tones(stack)
    spec = stft(out, cfg.stft, channel=cfg.channel)
    return analyze_spectrogram(spec, preds, cfg)


@dataclass
class OffsetComparison:
    report_with: ArtifactReport
    report_without: ArtifactReport
    deltas: list[dict]

    def offset_delta_db(self) -> float:
        """Mean energy gain (dB) of the offset stack over offset-replica frequencies."""
        vals = [d["delta_db"] for d in self.deltas if d["kind"] == "offset_replica"]
        return float(np.mean(vals)) if vals else 0.0

    def to_dict(self) -> dict:
        return {
            "with_offsets": self.report_with.to_dict(),
            "without_offsets": self.report_without.to_dict(),
            "deltas": self.deltas,
            "mean_offset_replica_delta_db": round(self.offset_delta_db(), 6),
        }


def _check_offset_pair(a: Stack, b: Stack) -> None:
    if a.input_rate != b.input_rate or len(a.layers) != len(b.layers):
        raise ConfigError("stacks differ in rate or depth")
    for i, (la, lb) in enumerate(zip(a.layers, b.layers)):
        sa, sb = la.spec, lb.spec
        fields = ("kind", "length", "stride", "factor", "in_channels", "out_channels", "mode")
        if any(getattr(sa, f) != getattr(sb, f) for f in fields):
            raise ConfigError(f"layer {i} differs in structure")
        if i > 0 and sa.activation != sb.activation:
            raise ConfigError(f"layer {i}: only the first layer's activation may differ")
        if (la.kernel is None) != (lb.kernel is None):
            raise ConfigError(f"layer {i}: kernel presence differs")
        if la.kernel is not None and not np.array_equal(la.kernel.weights, lb.kernel.weights):
            raise ConfigError(f"layer {i}: kernel weights differ")


def compare_offset(stack_with: Stack, stack_without: Stack, x: Signal,
                   cfg: AnalysisConfig | None = None) -> OffsetComparison:
    """Run both stacks on ``x`` and compare energy at each predicted tone.

    The stacks must match except for biases and the first layer's activation.
    """
    cfg = cfg or AnalysisConfig()
    _check_offset_pair(stack_with, stack_without)
    preds = predict_tones(stack_with)
    out_w = apply_stack(x, stack_with)[-1]
    out_wo = apply_stack(x, stack_without)[-1]
    spec_w = stft(out_w, cfg.stft, channel=cfg.channel)
    spec_wo = stft(out_wo, cfg.stft, channel=cfg.channel)
    deltas = []
    for t in preds:
        ew = band_energy_db(spec_w, t.frequency, cfg.match_tolerance_bins)
        ewo = band_energy_db(spec_wo, t.frequency, cfg.match_tolerance_bins)
        deltas.append({"frequency_hz": t.frequency, "kind": t.kind,
                       "energy_with_db": round(ew, 6), "energy_without_db": round(ewo, 6),
                       "delta_db": round(ew - ewo, 6)})
    return OffsetComparison(
        analyze_spectrogram(spec_w, preds, cfg),
        analyze_spectrogram(spec_wo, predict_tones(stack_without), cfg),
        deltas,
    )


def sdr(reference, estimate) -> float:
    """Signal-to-distortion ratio ``10 log10(sum ref^2 / sum (ref - est)^2)`` in dB.

    Returns ``inf`` when the estimate is exact.
    """
    ref = reference.samples if isinstance(reference, Signal) else np.asarray(reference, dtype=np.float64)
    est = estimate.samples if isinstance(estimate, Signal) else np.asarray(estimate, dtype=np.float64)
    if ref.shape != est.shape:
        raise ConfigError(f"shape mismatch {ref.shape} vs {est.shape}")
    num = float(np.sum(ref ** 2))
    if num == 0.0:
        raise ConfigError("reference signal is all zeros")
    den = float(np.sum((ref - est) ** 2))
    if den == 0.0:
        return math.inf
    return 10.0 * math.log10(num / den)
