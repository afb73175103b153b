"""Scikit-learn style estimators wrapping the neural model and the wavelet
baseline, so prominence estimation composes with the wider ML ecosystem
(``get_params``/``set_params``, ``clone``, pipelines).

``X`` is a list of utterances: ``PreparedUtterance`` objects or
``(mel, spans)`` tuples for the neural estimator, ``(audio, spans)`` tuples
for the waveform-domain baseline. ``y`` is a list of per-word target arrays
(omit it when ``X`` items already carry targets)."""

from __future__ import annotations

import numpy as np
import torch
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .baseline import DEFAULT_SCALES, fit_threshold, threshold_classify, wavelet_scores
from .errors import ConfigError
from .evaluation import pearson
from .model import ModelConfig
from .prepare import PreparedUtterance
from .training import TrainConfig, train


def _as_items(X, y=None) -> list[PreparedUtterance]:
    if y is not None and len(y) != len(X):
        raise ConfigError(f"X has {len(X)} utterances but y has {len(y)} targets")
    items = []
    for index, entry in enumerate(X):
        if isinstance(entry, PreparedUtterance):
            item = entry
            if y is not None:
                item = PreparedUtterance(
                    entry.id, entry.mel, entry.spans, np.asarray(y[index], np.float32)
                )
        else:
            mel, spans = entry
            target = np.asarray(y[index], np.float32) if y is not None else None
            item = PreparedUtterance(f"u{index:05d}", np.asarray(mel, np.float32), list(spans), target)
        items.append(item)
    return items


class NeuralProminenceEstimator(BaseEstimator):
    """Trainable word-prominence regressor with a scikit-learn interface."""

    def __init__(
        self,
        location: str = "intermediate",
        method: str = "sum",
        loss: str = "bce",
        layers_per_stack: int = 6,
        channels: int = 80,
        kernel_size: int = 3,
        learning_rate: float = 1e-3,
        max_steps: int = 6000,
        validate_every: int = 100,
        max_frames_per_batch: int = 75000,
        validation_fraction: float = 0.1,
        seed: int = 0,
    ):
        self.location = location
        self.method = method
        self.loss = loss
        self.layers_per_stack = layers_per_stack
        self.channels = channels
        self.kernel_size = kernel_size
        self.learning_rate = learning_rate
        self.max_steps = max_steps
        self.validate_every = validate_every
        self.max_frames_per_batch = max_frames_per_batch
        self.validation_fraction = validation_fraction
        self.seed = seed

    def _configs(self) -> tuple[ModelConfig, TrainConfig]:
        model_config = ModelConfig(
            location=self.location,
            method=self.method,
            loss=self.loss,
            layers_per_stack=self.layers_per_stack,
            channels=self.channels,
            kernel_size=self.kernel_size,
        )
        train_config = TrainConfig(
            learning_rate=self.learning_rate,
            max_steps=self.max_steps,
            validate_every=self.validate_every,
            max_frames_per_batch=self.max_frames_per_batch,
            seed=self.seed,
        )
        return model_config, train_config

    def fit(self, X, y=None, validation_set=None, stop_fn=None):
        items = _as_items(X, y)
        if validation_set is not None:
            train_items, val_items = items, _as_items(validation_set)
        else:
            n_val = max(1, int(len(items) * self.validation_fraction))
            if len(items) <= n_val:
                raise ConfigError("not enough utterances to hold out a validation set")
            order = np.random.default_rng(self.seed).permutation(len(items))
            val_idx = set(order[:n_val].tolist())
            train_items = [it for i, it in enumerate(items) if i not in val_idx]
            val_items = [items[i] for i in sorted(val_idx)]
        model_config, train_config = self._configs()
        result = train(model_config, train_config, train_items, val_items, stop_fn=stop_fn)
        self.model_ = result.model
        self.log_ = result.log
        self.best_step_ = result.best_step
        self.best_val_pearson_ = result.best_val_pearson
        return self

    def predict(self, X) -> list[np.ndarray]:
        check_is_fitted(self, "model_")
        return [
            self.model_.predict_prominence(torch.from_numpy(item.mel), item.spans)
            for item in _as_items(X)
        ]

    def score(self, X, y=None) -> float:
        """Pooled Pearson correlation over all words of X."""
        items = _as_items(X, y)
        predictions = self.predict(items)
        pred = np.concatenate(predictions)
        target = np.concatenate([item.target for item in items])
        return pearson(pred, target)


class WaveletProminenceEstimator(BaseEstimator):
    """Heuristic waveform-domain baseline; ``fit`` only calibrates the
    emphasis threshold."""

    def __init__(
        self,
        scales: tuple[int, ...] = DEFAULT_SCALES,
        weights: tuple[float, float, float] = (1.0, 1.0, 1.0),
    ):
        self.scales = scales
        self.weights = weights

    def predict(self, X) -> list[np.ndarray]:
        return [
            wavelet_scores(np.asarray(audio), list(spans), scales=tuple(self.scales),
                           weights=tuple(self.weights))
            for audio, spans in X
        ]

    def fit(self, X, y):
        scores = np.concatenate(self.predict(X))
        targets = np.concatenate([np.asarray(t, np.float64) for t in y])
        self.threshold_ = fit_threshold(scores, targets)
        return self

    def predict_emphasis(self, X) -> list[np.ndarray]:
        check_is_fitted(self, "threshold_")
        return [threshold_classify(s, self.threshold_) for s in self.predict(X)]

    def score(self, X, y) -> float:
        pred = np.concatenate(self.predict(X))
        target = np.concatenate([np.asarray(t, np.float64) for t in y])
        return pearson(pred, target)
