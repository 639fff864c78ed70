"""Removal-based faithfulness metrics with per-evaluation forward-pass accounting.

Every metric takes the model, a classification instance (whose cached
prediction supplies c(x) and p_c(x) for free) and a ranking of its tokens, and
returns a :class:`FaithfulnessScore` recording how many forward passes it spent.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ClassificationInstance, rank_tokens, remove_tokens, retain_tokens, top_k_count
from .models import MeteredModel

DEFAULT_B = (1, 5, 10, 20, 50)


class Metric(enum.Enum):
    DFMIT = "DFMIT"
    DFFOT = "DFFOT"
    COMP = "COMP"
    SUFF = "SUFF"
    CORR = "CORR"
    MONO = "MONO"

    @property
    def higher_is_faithful(self) -> bool:
        return self not in (Metric.DFFOT, Metric.SUFF)

    @property
    def value_range(self) -> tuple[float, float]:
        if self is Metric.DFMIT:
            return (0.0, 1.0)
        if self is Metric.DFFOT:
            return (0.0, 1.0)  # open at 0
        return (-1.0, 1.0)


ALL_METRICS = tuple(Metric)


def parse_metrics(text: str | Sequence[str]) -> tuple[Metric, ...]:
    names = text.split(",") if isinstance(text, str) else text
    out = []
    for n in names:
        if isinstance(n, Metric):
            out.append(n)
        elif n.strip():
            out.append(Metric(n.strip().upper()))
    return tuple(out)


@dataclass(frozen=True)
class FaithfulnessScore:
    metric: Metric
    value: float
    passes_used: int


class _Probe:
    """Counts the sequences a metric sends to the model."""

    def __init__(self, model: MeteredModel, target: int):
        self.model = model
        self.target = target
        self.passes = 0

    def probs(self, seqs) -> np.ndarray:
        self.passes += len(seqs)
        return self.model.predict_many(seqs)

    def prob(self, seq) -> float:
        return float(self.probs([seq])[0, self.target])

    def label(self, seq) -> int:
        return int(np.argmax(self.probs([seq])[0]))


def pearson(a: Sequence[float], b: Sequence[float]) -> float:
    """Pearson correlation; 0 when either side is constant or has length 1."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("pearson needs two vectors of equal length")
    if a.size == 0:
        raise ValueError("pearson needs at least one value")
    da = a - a.mean()
    db = b - b.mean()
    na = np.sqrt(da @ da)
    nb = np.sqrt(db @ db)
    if a.size < 2 or na == 0.0 or nb == 0.0:
        return 0.0
    r = float((da @ db) / (na * nb))
    return min(1.0, max(-1.0, r))


def _check(instance: ClassificationInstance, ranking) -> np.ndarray:
    ranking = np.asarray(ranking, dtype=np.int64)
    if instance.length < 1:
        raise ValueError("metrics need at least one token")
    if ranking.size != instance.length:
        raise ValueError("ranking length differs from instance length")
    return ranking


def dfmit(model: MeteredModel, instance: ClassificationInstance, ranking) -> FaithfulnessScore:
    ranking = _check(instance, ranking)
    probe = _Probe(model, instance.predicted_class)
    flipped = probe.label(remove_tokens(instance.tokens, ranking[:1])) != instance.predicted_class
    return FaithfulnessScore(Metric.DFMIT, float(flipped), probe.passes)


def dffot(model: MeteredModel, instance: ClassificationInstance, ranking) -> FaithfulnessScore:
    """Smallest fraction k/l_x of top tokens whose deletion flips the decision (1 if none)."""
    ranking = _check(instance, ranking)
    probe = _Probe(model, instance.predicted_class)
    n = instance.length
    for k in range(1, n + 1):
        if probe.label(remove_tokens(instance.tokens, ranking[:k])) != instance.predicted_class:
            return FaithfulnessScore(Metric.DFFOT, k / n, probe.passes)
    return FaithfulnessScore(Metric.DFFOT, 1.0, probe.passes)


def comp(model: MeteredModel, instance: ClassificationInstance, ranking,
         B: Sequence[float] = DEFAULT_B) -> FaithfulnessScore:
    ranking = _check(instance, ranking)
    if not len(B):
        raise ValueError("B must be non-empty")
    probe = _Probe(model, instance.predicted_class)
    n = instance.length
    seqs = [remove_tokens(instance.tokens, ranking[: top_k_count(n, q)]) for q in B]
    drops = instance.predicted_prob - probe.probs(seqs)[:, instance.predicted_class]
    return FaithfulnessScore(Metric.COMP, float(drops.mean()), probe.passes)


def suff(model: MeteredModel, instance: ClassificationInstance, ranking,
         B: Sequence[float] = DEFAULT_B) -> FaithfulnessScore:
    ranking = _check(instance, ranking)
    if not len(B):
        raise ValueError("B must be non-empty")
    probe = _Probe(model, instance.predicted_class)
    n = instance.length
    ks = np.array([top_k_count(n, q) for q in B])
    seqs = [retain_tokens(instance.tokens, ranking, k) for k in ks]
    drops = instance.predicted_prob - probe.probs(seqs)[:, instance.predicted_class]
    drops[ks == n] = 0.0  # x itself; avoid batch-shape rounding noise
    return FaithfulnessScore(Metric.SUFF, float(drops.mean()), probe.passes)


def corr(model: MeteredModel, instance: ClassificationInstance, ranking,
         interpretation) -> FaithfulnessScore:
    """Negative correlation between sorted importances and single-token-deletion probabilities."""
    ranking = _check(instance, ranking)
    u = np.asarray(interpretation, dtype=np.float64)[ranking]
    probe = _Probe(model, instance.predicted_class)
    seqs = [remove_tokens(instance.tokens, {int(i)}) for i in ranking]
    p = probe.probs(seqs)[:, instance.predicted_class]
    return FaithfulnessScore(Metric.CORR, -pearson(u, p), probe.passes)


def mono(model: MeteredModel, instance: ClassificationInstance, ranking,
         interpretation) -> FaithfulnessScore:
    """Correlation between sorted importances and probabilities as top prefixes are deleted."""
    ranking = _check(instance, ranking)
    u = np.asarray(interpretation, dtype=np.float64)[ranking]
    probe = _Probe(model, instance.predicted_class)
    seqs = [remove_tokens(instance.tokens, ranking[:k]) for k in range(1, instance.length)]
    p = np.concatenate(([instance.predicted_prob], probe.probs(seqs)[:, instance.predicted_class]))
    return FaithfulnessScore(Metric.MONO, pearson(u, p), probe.passes)


def evaluate(metric: Metric, model: MeteredModel, instance: ClassificationInstance,
             interpretation, B: Sequence[float] = DEFAULT_B) -> FaithfulnessScore:
    """Score one interpretation under ``metric``."""
    metric = Metric(metric)
    ranking = rank_tokens(interpretation)
    if metric is Metric.DFMIT:
        return dfmit(model, instance, ranking)
    if metric is Metric.DFFOT:
        return dffot(model, instance, ranking)
    if metric is Metric.COMP:
        return comp(model, instance, ranking, B)
    if metric is Metric.SUFF:
        return suff(model, instance, ranking, B)
    if metric is Metric.CORR:
        return corr(model, instance, ranking, interpretation)
    return mono(model, instance, ranking, interpretation)


def compare(metric: Metric, s_u: FaithfulnessScore, s_v: FaithfulnessScore) -> bool:
    """True iff ``s_u`` is strictly more faithful than ``s_v``; ties are not wins."""
    metric = Metric(metric)
    if s_u.metric is not metric or s_v.metric is not metric:
        raise ValueError("scores come from a different metric")
    if metric.higher_is_faithful:
        return s_u.value > s_v.value
    return s_u.value < s_v.value
