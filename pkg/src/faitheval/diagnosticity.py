"""Golden sets of (method, random) interpretation pairs and the diagnosticity estimator."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import ClassificationInstance, InterpretationPair
from .interpreters import INTERPRETERS, Interpreter, InterpreterConfig, interpret_random
from .metrics import DEFAULT_B, FaithfulnessScore, Metric, compare, evaluate
from .models import MeteredModel

GOLDEN_SET_VERSION = 1

Scorer = Callable[[MeteredModel, ClassificationInstance, np.ndarray], FaithfulnessScore]
Comparator = Callable[[Metric, FaithfulnessScore, FaithfulnessScore], bool]


@dataclass
class GoldenSet:
    pairs: list[InterpretationPair]
    provenance: list[str]
    seed: int
    instance_ids: list[int] = field(default_factory=list)
    interpreter_passes: list[int] = field(default_factory=list)

    def __post_init__(self):
        if len(self.provenance) != len(self.pairs):
            raise ValueError("one provenance entry per pair is required")
        if not self.instance_ids:
            self.instance_ids = [-1] * len(self.pairs)
        if not self.interpreter_passes:
            self.interpreter_passes = [0] * len(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class DiagnosticityEstimate:
    metric: Metric | str
    value: float
    standard_error: float
    sample_count: int
    wins: np.ndarray
    by_interpreter: Mapping[str, float]


@dataclass(frozen=True)
class ComplexityReport:
    metric: Metric | str
    mean_passes: float
    min_passes: int
    max_passes: int


def generate_golden_set(instances: Sequence[ClassificationInstance], model: MeteredModel,
                        K: int, seed: int,
                        interpreters: Mapping[str, Interpreter] | None = None,
                        config: InterpreterConfig | None = None) -> GoldenSet:
    """Sample K (method interpretation, uniform-random interpretation) pairs.

    Each pair draws an instance and an interpreter uniformly with replacement.
    LIME and the random side get their own seeds derived from ``seed``.
    """
    interpreters = INTERPRETERS if interpreters is None else interpreters
    if not instances:
        raise ValueError("empty instance pool")
    if not interpreters:
        raise ValueError("no interpretation methods given")
    if K < 1:
        raise ValueError("K must be >= 1")
    config = config or InterpreterConfig()
    names = list(interpreters)
    rng = np.random.default_rng(seed)
    pairs, provenance, ids, passes = [], [], [], []
    for _ in range(K):
        i = int(rng.integers(len(instances)))
        name = names[int(rng.integers(len(names)))]
        method_seed, random_seed = (int(s) for s in rng.integers(0, 2**63 - 1, size=2))
        instance = instances[i]
        before = model.passes
        u = interpreters[name](model, instance, replace(config, seed=method_seed))
        passes.append(model.passes - before)
        v = interpret_random(instance, random_seed)
        pairs.append(InterpretationPair(instance, u, v))
        provenance.append(name)
        ids.append(i)
    return GoldenSet(pairs, provenance, seed, ids, passes)


def score_pairs(metric: Metric | Scorer, golden_set: GoldenSet, model: MeteredModel | None,
                B: Sequence[float] = DEFAULT_B) -> list[tuple[FaithfulnessScore, FaithfulnessScore]]:
    """Metric scores of both sides of every pair, in golden-set order."""
    if not callable(metric):
        metric = Metric(metric)
    if isinstance(metric, Metric):
        def scorer(m, inst, u):
            return evaluate(metric, m, inst, u, B)
    else:
        scorer = metric
    return [(scorer(model, p.instance, p.faithful), scorer(model, p.instance, p.unfaithful))
            for p in golden_set.pairs]


def estimate_diagnosticity(metric: Metric | Scorer, golden_set: GoldenSet,
                           model: MeteredModel | None, B: Sequence[float] = DEFAULT_B,
                           comparator: Comparator = compare,
                           scores: list | None = None) -> DiagnosticityEstimate:
    """Fraction of pairs in which the metric strictly prefers the method interpretation.

    ``metric`` is a :class:`Metric` or any scorer callable; ``scores`` may carry
    precomputed results of :func:`score_pairs`.
    """
    if len(golden_set) == 0:
        raise ValueError("empty golden set")
    if scores is None:
        scores = score_pairs(metric, golden_set, model, B)
    metric_id = scores[0][0].metric
    wins = np.array([bool(comparator(metric_id, su, sv)) for su, sv in scores])
    K = wins.size
    value = float(wins.sum()) / K
    by = {}
    prov = np.array(golden_set.provenance)
    for name in sorted(set(golden_set.provenance)):
        by[name] = float(wins[prov == name].mean())
    return DiagnosticityEstimate(metric_id, value, math.sqrt(value * (1 - value) / K), K, wins, by)


def measure_time_complexity(metric: Metric | Scorer, golden_set: GoldenSet,
                            model: MeteredModel | None, B: Sequence[float] = DEFAULT_B,
                            scores: list | None = None) -> ComplexityReport:
    """Mean/min/max forward passes of the metric over the method-side interpretations."""
    if len(golden_set) == 0:
        raise ValueError("empty golden set")
    if scores is None:
        scores = score_pairs(metric, golden_set, model, B)
    passes = np.array([su.passes_used for su, _ in scores])
    return ComplexityReport(scores[0][0].metric, float(passes.mean()), int(passes.min()),
                            int(passes.max()))


def save_golden_set(golden_set: GoldenSet, path: str | Path) -> None:
    """Write a versioned, self-contained golden set (instances included)."""
    pairs = golden_set.pairs
    lengths = np.array([p.instance.length for p in pairs], dtype=np.int64)
    header = {"version": GOLDEN_SET_VERSION, "seed": golden_set.seed,
              "provenance": golden_set.provenance}
    with open(path, "wb") as fh:
        np.savez(
            fh,
            header=np.array(json.dumps(header)),
            lengths=lengths,
            tokens=np.array([t for p in pairs for t in p.instance.tokens], dtype=np.int64),
            gold=np.array([p.instance.gold_label for p in pairs], dtype=np.int64),
            predicted=np.array([p.instance.predicted_class for p in pairs], dtype=np.int64),
            probs=np.stack([p.instance.predicted_probs for p in pairs]),
            faithful=np.concatenate([p.faithful for p in pairs]),
            unfaithful=np.concatenate([p.unfaithful for p in pairs]),
            instance_ids=np.array(golden_set.instance_ids, dtype=np.int64),
            interpreter_passes=np.array(golden_set.interpreter_passes, dtype=np.int64),
        )


def load_golden_set(path: str | Path) -> GoldenSet:
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        if header.get("version") != GOLDEN_SET_VERSION:
            raise ValueError(f"unsupported golden set version {header.get('version')}")
        bounds = np.concatenate(([0], np.cumsum(data["lengths"])))
        tokens, u, v = data["tokens"], data["faithful"], data["unfaithful"]
        pairs = []
        for j in range(len(data["lengths"])):
            a, b = bounds[j], bounds[j + 1]
            inst = ClassificationInstance(tuple(tokens[a:b].tolist()), int(data["gold"][j]),
                                          int(data["predicted"][j]), data["probs"][j])
            pairs.append(InterpretationPair(inst, u[a:b], v[a:b]))
        return GoldenSet(pairs, list(header["provenance"]), int(header["seed"]),
                         data["instance_ids"].tolist(), data["interpreter_passes"].tolist())
