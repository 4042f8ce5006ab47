"""Neural upsampling layers in 1-D, and tools to predict and measure their artifacts."""

__version__ = "0.1.0"

from .signal import Kernel, Signal, harmonic_signal, ones, sine, white_noise
from .ops import (conv1d, interp_kernel, interpolate_by_convolution, linear_upsample, nearest_upsample,
                  periodic_shuffle, stretch, subpixel_upsample, transposed_conv1d)
from .layers import (Init, Layer, LayerKind, LayerSpec, Overlap, Stack, apply_stack, build_stack,
                     init_kernel, strip_offsets)
from .spectral import Spectrogram, StftConfig, fft, freq_response, stft
from .artifacts import (AnalysisConfig, ArtifactReport, TonePrediction, analyze, compare_offset,
                        detect_tonal_peaks, measure_filtering, predict_tones, sdr)
from .autodiff import Tape, TrainConfig, backward, gradient_spectrum, train_toy

__all__ = [
    "Signal", "Kernel", "white_noise", "ones", "sine", "harmonic_signal",
    "conv1d", "transposed_conv1d", "stretch", "interp_kernel", "nearest_upsample", "linear_upsample",
    "interpolate_by_convolution", "periodic_shuffle", "subpixel_upsample",
    "Init", "Layer", "LayerKind", "LayerSpec", "Overlap", "Stack", "apply_stack", "build_stack",
    "init_kernel", "strip_offsets",
    "Spectrogram", "StftConfig", "fft", "freq_response", "stft",
    "AnalysisConfig", "ArtifactReport", "TonePrediction", "analyze", "compare_offset",
    "detect_tonal_peaks", "measure_filtering", "predict_tones", "sdr",
    "Tape", "TrainConfig", "backward", "gradient_spectrum", "train_toy",
]
