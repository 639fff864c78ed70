"""Domain types shared by every module, plus token ranking and removal/retention."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

TokenSequence = tuple  # tuple of token ids (or raw string tokens before vocabulary lookup)


@dataclass(frozen=True)
class ClassificationInstance:
    """Tokens plus the model's cached prediction for them."""

    tokens: tuple[int, ...]
    gold_label: int
    predicted_class: int
    predicted_probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.predicted_probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("predicted_probs must be a non-empty vector")
        if np.any(probs < 0) or np.any(probs > 1) or abs(probs.sum() - 1.0) > 1e-6:
            raise ValueError("predicted_probs is not a probability vector")
        if int(np.argmax(probs)) != self.predicted_class:
            raise ValueError("predicted_class must be the argmax of predicted_probs")
        probs.setflags(write=False)
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))
        object.__setattr__(self, "predicted_probs", probs)

    @property
    def length(self) -> int:
        return len(self.tokens)

    @property
    def predicted_prob(self) -> float:
        """p_c(x) for the predicted class, read from the cache."""
        return float(self.predicted_probs[self.predicted_class])


def as_interpretation(scores: Iterable[float], length: int | None = None) -> np.ndarray:
    """Validate and freeze a per-token score vector."""
    u = np.array(scores, dtype=np.float64)
    if u.ndim != 1:
        raise ValueError("an interpretation is a 1-d score vector")
    if length is not None and u.size != length:
        raise ValueError(f"interpretation has {u.size} scores for {length} tokens")
    if not np.all(np.isfinite(u)):
        raise ValueError("interpretation scores must be finite")
    u.setflags(write=False)
    return u


@dataclass(frozen=True)
class InterpretationPair:
    """A method-generated interpretation and a random one for the same instance."""

    instance: ClassificationInstance
    faithful: np.ndarray
    unfaithful: np.ndarray

    def __post_init__(self):
        n = self.instance.length
        object.__setattr__(self, "faithful", as_interpretation(self.faithful, n))
        object.__setattr__(self, "unfaithful", as_interpretation(self.unfaithful, n))


def rank_tokens(interpretation: Sequence[float]) -> np.ndarray:
    """Token positions ordered most important first.

    Ties are broken by ascending original position, so the order is fully
    determined by the scores.
    """
    u = np.asarray(interpretation, dtype=np.float64)
    if u.size == 0:
        raise ValueError("empty interpretation")
    # stable sort on negated scores keeps positional order among equal scores
    order = np.argsort(-u, kind="stable")
    order.setflags(write=False)
    return order


def remove_tokens(seq: Sequence, positions: Iterable[int]) -> tuple:
    """Delete the tokens at ``positions``; the sequence shortens."""
    drop = set(int(p) for p in positions)
    n = len(seq)
    for p in drop:
        if p < 0 or p >= n:
            raise IndexError(f"position {p} out of range for length {n}")
    return tuple(t for i, t in enumerate(seq) if i not in drop)


def retain_tokens(seq: Sequence, ranking: Sequence[int], k: int) -> tuple:
    """Keep only the top-``k`` ranked tokens, in their original relative order."""
    n = len(seq)
    if k < 1 or k > n:
        raise ValueError(f"k={k} out of range 1..{n}")
    keep = sorted(int(p) for p in ranking[:k])
    return tuple(seq[p] for p in keep)


def _round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def top_k_count(length: int, q: float) -> int:
    """Number of tokens in the top ``q`` percent of a ``length``-token input."""
    if length < 1:
        raise ValueError("top_k_count needs at least one token")
    if not 0 < q <= 100:
        raise ValueError(f"q must lie in (0, 100], got {q}")
    return max(1, _round_half_away(q * length / 100.0))
