"""Linear prediction heads and their SGD training.

Classification heads train with mean binary cross-entropy on sigmoid scores;
regression heads train with mean squared error on raw logits against labels
normalized to y/100, plus an optional L1 penalty applied as a proximal
soft-threshold after each batch (bias exempt). Training is deterministic:
the per-epoch shuffle derives from an explicit integer seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .seeding import derive_seed, shuffled_indices

CLASSIFICATION = "classification"
REGRESSION = "regression"

REPORT_SCALE = 100.0


@dataclass(frozen=True)
class LinearModel:
    """Weight vector + bias; the trainable head for one context model."""

    weights: np.ndarray
    bias: float
    task: str

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64))
        if self.task not in (CLASSIFICATION, REGRESSION):
            raise ValueError(f"unknown task: {self.task!r}")
        # sum() is non-finite iff any entry is, and is one cheap reduction
        if not math.isfinite(float(self.weights.sum())) or not math.isfinite(self.bias):
            raise ValueError("model parameters must be finite")

    @property
    def dim(self) -> int:
        return int(self.weights.shape[0])

    def flatten(self) -> np.ndarray:
        """Parameters as one vector: weights followed by bias."""
        return np.concatenate([self.weights, [self.bias]])

    def with_flat(self, params: np.ndarray) -> "LinearModel":
        params = np.asarray(params, dtype=np.float64)
        if params.shape[0] != self.dim + 1:
            raise ValueError(f"expected {self.dim + 1} parameters, got {params.shape[0]}")
        return LinearModel(weights=params[:-1].copy(), bias=float(params[-1]), task=self.task)


def zero_model(dim: int, task: str) -> LinearModel:
    return LinearModel(weights=np.zeros(dim, dtype=np.float64), bias=0.0, task=task)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    batch_size: int = 10
    l1_lambda: float = 0.0
    epochs: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.l1_lambda < 0:
            raise ValueError("l1_lambda must be >= 0")


def sigmoid(z):
    """Numerically stable logistic function (array or scalar)."""
    if isinstance(z, float):
        if z >= 0.0:
            return 1.0 / (1.0 + math.exp(-z))
        ez = math.exp(z)
        return ez / (1.0 + ez)
    return np.exp(-np.logaddexp(0.0, -np.asarray(z, dtype=np.float64)))


def _softplus(z):
    return np.logaddexp(0.0, np.asarray(z, dtype=np.float64))


def predict_logit(model: LinearModel, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != model.dim:
        raise ValueError(f"dimension mismatch: input {x.shape[0]}, model {model.dim}")
    return float(model.weights @ x + model.bias)


def predict_score(model: LinearModel, x: np.ndarray) -> float:
    """Sigmoid of the logit for classification; the raw logit for regression.

    Regression scores live on the internal 0..1 scale; `to_report_scale`
    rescales and clamps them to 0..100 at reporting time.
    """
    logit = predict_logit(model, x)
    if model.task == CLASSIFICATION:
        return float(sigmoid(logit))
    return logit


def to_report_scale(score: float) -> float:
    """Map an internal regression score to the reported 0..100 scale."""
    return min(100.0, max(0.0, REPORT_SCALE * score))


def _batch_arrays(batch: list[tuple[np.ndarray, float]]) -> tuple[np.ndarray, np.ndarray]:
    xs = np.stack([np.asarray(x, dtype=np.float64) for x, _ in batch])
    ys = np.array([y for _, y in batch], dtype=np.float64)
    return xs, ys


def loss(model: LinearModel, batch: list[tuple[np.ndarray, float]]) -> float:
    """Mean training loss over a batch, excluding any L1 term."""
    if not batch:
        raise ValueError("empty batch")
    xs, ys = _batch_arrays(batch)
    logits = xs @ model.weights + model.bias
    if model.task == CLASSIFICATION:
        return float(np.mean(ys * _softplus(-logits) + (1.0 - ys) * _softplus(logits)))
    targets = ys / REPORT_SCALE
    return float(np.mean((logits - targets) ** 2))


def _grad_arrays(xs: np.ndarray, ys: np.ndarray, weights: np.ndarray,
                 bias: float, task: str) -> tuple[np.ndarray, float]:
    logits = xs @ weights + bias
    if task == CLASSIFICATION:
        residual = sigmoid(logits) - ys
    else:
        residual = 2.0 * (logits - ys / REPORT_SCALE)
    m = xs.shape[0]
    grad_w = xs.T @ residual / m
    grad_b = float(np.sum(residual) / m)
    return grad_w, grad_b


def grad(model: LinearModel, batch: list[tuple[np.ndarray, float]]) -> tuple[np.ndarray, float]:
    """Analytic mean gradient of `loss` w.r.t. (weights, bias)."""
    if not batch:
        raise ValueError("empty batch")
    xs, ys = _batch_arrays(batch)
    return _grad_arrays(xs, ys, model.weights, model.bias, model.task)


def _soft_threshold(weights: np.ndarray, amount: float) -> np.ndarray:
    return np.sign(weights) * np.maximum(np.abs(weights) - amount, 0.0)


def sgd_epoch(
    model: LinearModel,
    samples: list[tuple[np.ndarray, float]],
    cfg: TrainConfig,
    seed: int | None = None,
) -> LinearModel:
    """One pass over the samples: shuffle, step per batch, prox-L1 for regression.

    The shuffle uses `seed` when given, else cfg.rng_seed; multi-epoch
    callers advance the seed per epoch (see `train_model`). The last
    partial batch is used, not dropped.
    """
    if not samples:
        raise ValueError("no samples")
    order = shuffled_indices(len(samples), cfg.rng_seed if seed is None else seed)
    xs_all = np.stack([np.asarray(x, dtype=np.float64) for x, _ in samples])
    ys_all = np.array([y for _, y in samples], dtype=np.float64)
    weights = model.weights.copy()
    bias = model.bias
    step = cfg.learning_rate
    for start in range(0, len(order), cfg.batch_size):
        chosen = order[start : start + cfg.batch_size]
        grad_w, grad_b = _grad_arrays(xs_all[chosen], ys_all[chosen],
                                      weights, bias, model.task)
        weights = weights - step * grad_w
        bias = bias - step * grad_b
        if model.task == REGRESSION and cfg.l1_lambda > 0.0:
            weights = _soft_threshold(weights, step * cfg.l1_lambda)
    return LinearModel(weights=weights, bias=bias, task=model.task)


def epoch_seed(base_seed: int, epoch: int) -> int:
    """Shuffle seed for one epoch of a multi-epoch run."""
    return derive_seed(base_seed, epoch)


def train_model(
    model: LinearModel,
    samples: list[tuple[np.ndarray, float]],
    cfg: TrainConfig,
) -> LinearModel:
    """cfg.epochs passes of sgd_epoch with the per-epoch seed schedule."""
    for epoch in range(cfg.epochs):
        model = sgd_epoch(model, samples, cfg, seed=epoch_seed(cfg.rng_seed, epoch))
    return model


def save_checkpoint(model: LinearModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(
            {"task": model.task, "bias": model.bias,
             "weights": [float(w) for w in model.weights]},
            fh,
        )


def load_checkpoint(path) -> LinearModel:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    return LinearModel(weights=np.asarray(obj["weights"], dtype=np.float64),
                       bias=float(obj["bias"]), task=obj["task"])
