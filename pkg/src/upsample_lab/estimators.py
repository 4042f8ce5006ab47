"""scikit-learn wrappers.

Rows of ``X`` are mono signals sampled at ``sample_rate``. Transformers
realise their kernels in ``fit`` and map each row through the layer.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .artifacts import AnalysisConfig, analyze_spectrogram, predict_tones
from .autodiff import TrainConfig, train_toy
from .errors import ShapeError
from .layers import LayerSpec, apply_stack, build_stack, output_length
from .signal import Signal
from .spectral import StftConfig, stft
from .validation import check_positive_int


class _StackTransformer(TransformerMixin, BaseEstimator):
    """Shared fit/transform for estimators backed by a layer stack."""

    def _specs(self) -> list[LayerSpec]:
        raise NotImplementedError

    def fit(self, X, y=None):
        validate_data(self, X, dtype=np.float64)
        check_positive_int(self.sample_rate, "sample_rate")
        self.stack_ = build_stack(self._specs(), self.sample_rate, self.seed)
        self.output_rate_ = self.stack_.output_rate
        return self

    def transform(self, X):
        check_is_fitted(self, "stack_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        rows = [apply_stack(Signal(row, self.sample_rate), self.stack_)[-1].samples[0] for row in X]
        return np.vstack(rows)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "stack_")
        n = output_length(self.stack_, self.n_features_in_)
        return np.array([f"t{i}" for i in range(n)], dtype=object)


class TransposedConvUpsampler(_StackTransformer):
    def __init__(self, length=8, stride=4, init="RandomUniform", use_bias=False, activation=None,
                 sample_rate=4000, seed=0):
        self.length = length
        self.stride = stride
        self.init = init
        self.use_bias = use_bias
        self.activation = activation
        self.sample_rate = sample_rate
        self.seed = seed

    def _specs(self):
        return [LayerSpec("TransposedConv", length=self.length, stride=self.stride, init=self.init,
                          use_bias=self.use_bias, activation=self.activation)]

    @property
    def kernel_(self):
        check_is_fitted(self, "stack_")
        return self.stack_.layers[0].kernel


class InterpolationUpsampler(_StackTransformer):
    """Nearest or linear interpolation by ``factor``; no learnable weights."""

    def __init__(self, factor=2, mode="nearest", sample_rate=4000, seed=0):
        self.factor = factor
        self.mode = mode
        self.sample_rate = sample_rate
        self.seed = seed

    def _specs(self):
        kind = {"nearest": "NearestUpsample", "linear": "LinearUpsample"}.get(self.mode)
        if kind is None:
            raise ValueError(f"mode must be 'nearest' or 'linear', got {self.mode!r}")
        return [LayerSpec(kind, factor=self.factor)]


class SubpixelUpsampler(_StackTransformer):
    def __init__(self, length=3, factor=2, init="RandomUniform", sample_rate=4000, seed=0):
        self.length = length
        self.factor = factor
        self.init = init
        self.sample_rate = sample_rate
        self.seed = seed

    def _specs(self):
        return [LayerSpec("SubpixelConv", length=self.length, factor=self.factor, init=self.init)]

    @property
    def kernel_(self):
        check_is_fitted(self, "stack_")
        return self.stack_.layers[0].kernel


class StackUpsampler(_StackTransformer):
    """Arbitrary stack given as a list of layer dicts (stack JSON ``layers`` entries)."""

    def __init__(self, layers=None, sample_rate=4000, seed=0):
        self.layers = layers
        self.sample_rate = sample_rate
        self.seed = seed

    def _specs(self):
        layers = self.layers or []
        return [s if isinstance(s, LayerSpec) else LayerSpec.from_dict(s) for s in layers]


class TonalArtifactDetector(BaseEstimator):
    """Flags rows whose spectrum shows tonal peaks.

    ``predict`` gives the tonal verdict per row; ``decision_function``
    gives the largest peak prominence in dB (``-inf`` without peaks).
    ``stack`` is optional and only adds tone predictions to ``report``.
    """

    def __init__(self, n_fft=2048, hop=512, center=False, min_prominence_db=10.0, n_bands=8, sample_rate=4000,
                 stack=None):
        self.n_fft = n_fft
        self.hop = hop
        self.center = center
        self.min_prominence_db = min_prominence_db
        self.n_bands = n_bands
        self.sample_rate = sample_rate
        self.stack = stack

    def fit(self, X, y=None):
        validate_data(self, X, dtype=np.float64)
        self.config_ = AnalysisConfig(StftConfig(n_fft=self.n_fft, hop=self.hop, center=self.center),
                                      min_prominence_db=self.min_prominence_db, n_bands=self.n_bands)
        return self

    def report(self, row):
        check_is_fitted(self, "config_")
        spec = stft(Signal(row, self.sample_rate), self.config_.stft)
        preds = predict_tones(self.stack) if self.stack is not None else []
        return analyze_spectrogram(spec, preds, self.config_)

    def decision_function(self, X):
        check_is_fitted(self, "config_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return np.array([self.report(row).max_prominence for row in X])

    def predict(self, X):
        check_is_fitted(self, "config_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return np.array([self.report(row).tonal for row in X], dtype=bool)


class StackRegressor(RegressorMixin, BaseEstimator):
    """Trains a stack so each input row maps to the matching target row (L1 loss).

    ``X`` holds input signals, ``Y`` the upsampled targets with
    ``output_length(stack, X.shape[1])`` samples per row.
    """

    def __init__(self, layers=None, sample_rate=4000, seed=0, steps=2000, learning_rate=2e-4,
                 optimizer="adam"):
        self.layers = layers
        self.sample_rate = sample_rate
        self.seed = seed
        self.steps = steps
        self.learning_rate = learning_rate
        self.optimizer = optimizer

    def fit(self, X, Y):
        X, Y = validate_data(self, X, Y, dtype=np.float64, multi_output=True)
        Y = np.atleast_2d(Y.T).T
        specs = [s if isinstance(s, LayerSpec) else LayerSpec.from_dict(s) for s in (self.layers or [])]
        stack = build_stack(specs, self.sample_rate, self.seed)
        n_out = output_length(stack, X.shape[1])
        if Y.shape[1] != n_out:
            raise ShapeError(f"targets need {n_out} samples per row, got {Y.shape[1]}")
        data = [(Signal(x, self.sample_rate), Signal(y, stack.output_rate)) for x, y in zip(X, Y)]
        cfg = TrainConfig(steps=self.steps, learning_rate=self.learning_rate, seed=self.seed,
                          optimizer=self.optimizer)
        result = train_toy(stack, data, cfg)
        self.stack_ = result.stack
        self.loss_curve_ = list(result.losses)
        return self

    def predict(self, X):
        check_is_fitted(self, "stack_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return np.vstack([apply_stack(Signal(row, self.sample_rate), self.stack_)[-1].samples[0] for row in X])

    def score(self, X, y, sample_weight=None):
        """Negative mean absolute error, so larger is better."""
        pred = self.predict(X)
        return -float(np.mean(np.abs(pred - np.asarray(y, dtype=np.float64))))
