"""Interpretation methods: word omission, saliency, integrated gradients, LIME and random."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import ClassificationInstance, as_interpretation, remove_tokens
from .models import MeteredModel

REDUCTIONS = ("mean", "l2")


@dataclass(frozen=True)
class InterpreterConfig:
    lime_samples: int = 200
    lime_kernel_width: float = 0.25
    lime_ridge_lambda: float = 1.0
    ig_steps: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.lime_samples < 1 or self.ig_steps < 1:
            raise ValueError("sample and step counts must be >= 1")
        if self.lime_kernel_width <= 0:
            raise ValueError("kernel width must be positive")
        if self.lime_ridge_lambda < 0:
            raise ValueError("ridge penalty must be non-negative")


def _reduce(grads: np.ndarray, reduction: str) -> np.ndarray:
    if reduction == "mean":
        return grads.mean(axis=1)
    if reduction == "l2":
        return np.linalg.norm(grads, axis=1)
    raise ValueError(f"unknown reduction {reduction!r}")


def _require_tokens(instance: ClassificationInstance) -> None:
    if instance.length < 1:
        raise ValueError("interpretation needs at least one token")


def interpret_word_omission(model: MeteredModel, instance: ClassificationInstance,
                            config: InterpreterConfig | None = None) -> np.ndarray:
    """Drop in p_c(x) when each token is deleted on its own; l_x passes."""
    _require_tokens(instance)
    c = instance.predicted_class
    variants = [remove_tokens(instance.tokens, {i}) for i in range(instance.length)]
    probs = model.predict_many(variants)[:, c]
    return as_interpretation(instance.predicted_prob - probs)


def interpret_saliency(model: MeteredModel, instance: ClassificationInstance,
                       reduction: str = "mean") -> np.ndarray:
    _require_tokens(instance)
    grads = model.grad_wrt_embeddings(instance.tokens, instance.predicted_class)
    return as_interpretation(_reduce(grads, reduction))


def integrated_gradients_matrix(model: MeteredModel, tokens, target: int, steps: int,
                                output: str = "prob") -> np.ndarray:
    """Per-token, per-dimension path attributions from the zero-embedding baseline.

    Uses the midpoint rule with ``steps`` gradient evaluations.
    """
    if steps < 1:
        raise ValueError("ig_steps must be >= 1")
    emb = model.embed(tokens)
    if emb.shape[0] == 0:
        raise ValueError("gradient undefined on empty input")
    total = np.zeros_like(emb)
    for s in range(steps):
        alpha = (s + 0.5) / steps
        total += model.prob_and_grad_at(alpha * emb, target, output=output)[1]
    return emb * (total / steps)


def interpret_integrated_gradients(model: MeteredModel, instance: ClassificationInstance,
                                   reduction: str = "mean",
                                   config: InterpreterConfig | None = None) -> np.ndarray:
    _require_tokens(instance)
    config = config or InterpreterConfig()
    attr = integrated_gradients_matrix(model, instance.tokens, instance.predicted_class,
                                       config.ig_steps)
    return as_interpretation(_reduce(attr, reduction))


def lime_samples(length: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Binary presence masks (n x length); each row deletes between 1 and ``length`` tokens."""
    masks = np.ones((n, length), dtype=bool)
    for row in masks:
        size = int(rng.integers(1, length + 1))
        row[rng.choice(length, size=size, replace=False)] = False
    return masks


def weighted_ridge(features: np.ndarray, target: np.ndarray, weights: np.ndarray,
                   lam: float) -> tuple[np.ndarray, float]:
    """Weighted least squares with an unpenalized intercept and an L2 penalty."""
    w = weights / weights.sum()
    fmean = w @ features
    tmean = float(w @ target)
    fc = features - fmean
    tc = target - tmean
    gram = fc.T @ (fc * weights[:, None]) + lam * np.eye(features.shape[1])
    coef = np.linalg.solve(gram, fc.T @ (weights * tc))
    return coef, tmean - float(fmean @ coef)


def interpret_lime(model: MeteredModel, instance: ClassificationInstance,
                   config: InterpreterConfig | None = None) -> np.ndarray:
    """Coefficients of a local weighted ridge surrogate over token presence.

    Perturbations delete random token subsets; samples are weighted by
    exp(-d^2 / width^2) with d the fraction of tokens removed.
    """
    _require_tokens(instance)
    config = config or InterpreterConfig()
    rng = np.random.default_rng(config.seed)
    n = instance.length
    masks = lime_samples(n, config.lime_samples, rng)
    toks = instance.tokens
    variants = [tuple(t for t, keep in zip(toks, m) if keep) for m in masks]
    target = model.predict_many(variants)[:, instance.predicted_class]
    dist = 1.0 - masks.mean(axis=1)
    weights = np.exp(-(dist**2) / config.lime_kernel_width**2)
    coef, _ = weighted_ridge(masks.astype(np.float64), target, weights, config.lime_ridge_lambda)
    return as_interpretation(coef)


def interpret_random(instance: ClassificationInstance | int, seed: int) -> np.ndarray:
    """I.i.d. Uniform[0, 1) scores; never touches a model."""
    length = instance if isinstance(instance, int) else instance.length
    if length < 1:
        raise ValueError("interpretation needs at least one token")
    return as_interpretation(np.random.default_rng(seed).random(length))


Interpreter = Callable[[MeteredModel, ClassificationInstance, InterpreterConfig], np.ndarray]

INTERPRETERS: dict[str, Interpreter] = {
    "LIME": lambda m, x, cfg: interpret_lime(m, x, cfg),
    "WO": lambda m, x, cfg: interpret_word_omission(m, x, cfg),
    "SA_mu": lambda m, x, cfg: interpret_saliency(m, x, "mean"),
    "SA_l2": lambda m, x, cfg: interpret_saliency(m, x, "l2"),
    "IG_mu": lambda m, x, cfg: interpret_integrated_gradients(m, x, "mean", cfg),
    "IG_l2": lambda m, x, cfg: interpret_integrated_gradients(m, x, "l2", cfg),
}
