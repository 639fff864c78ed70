"""End-to-end pipeline: corpus -> model -> golden set -> diagnosticity and complexity."""

from __future__ import annotations

import logging
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from ..core import ClassificationInstance
from ..diagnosticity import (ComplexityReport, DiagnosticityEstimate, GoldenSet,
                             estimate_diagnosticity, generate_golden_set, load_golden_set,
                             measure_time_complexity, save_golden_set, score_pairs)
from ..interpreters import INTERPRETERS
from ..metrics import Metric, evaluate
from ..models import MeteredModel, Vocabulary, accuracy, train
from .config import ExperimentConfig
from .corpus import Corpus, bundled_corpus, load_corpus

log = logging.getLogger(__name__)


class ExperimentError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage


@contextmanager
def stage(name: str):
    log.info("stage %s", name)
    try:
        yield
    except ExperimentError:
        raise
    except Exception as exc:
        raise ExperimentError(name, exc) from exc


@dataclass
class DisagreementRow:
    """All metric values of every interpreter on one test instance."""

    instance_id: int
    tokens: list[str]
    scores: dict[str, dict[str, tuple[float, int]]]  # metric -> interpreter -> (value, passes)

    def ranks(self, metric: str) -> dict[str, int]:
        return rank_interpreters(Metric(metric), {k: v for k, (v, _) in self.scores[metric].items()})

    def top_choice(self, metric: str) -> set[str]:
        return {name for name, r in self.ranks(metric).items() if r == 1}


def rank_interpreters(metric: Metric, values: dict[str, float]) -> dict[str, int]:
    """Rank 1 = most faithful under the metric's orientation; ties share the lowest rank."""
    names = list(values)
    oriented = np.array([values[n] for n in names], dtype=np.float64)
    if metric.higher_is_faithful:
        oriented = -oriented
    ranks = rankdata(oriented, method="min").astype(int)
    return dict(zip(names, ranks.tolist()))


@dataclass
class Report:
    metrics: list[Metric]
    diagnosticity: dict[Metric, DiagnosticityEstimate]
    complexity: dict[Metric, ComplexityReport]
    disagreement: list[DisagreementRow]
    meta: dict = field(default_factory=dict)

    def scatter_points(self) -> list[tuple[str, float, float]]:
        return [(m.value, self.complexity[m].mean_passes, self.diagnosticity[m].value)
                for m in self.metrics]

    def conflicting_instances(self, a: str = "SUFF", b: str = "DFFOT") -> list[int]:
        """Instances where metrics ``a`` and ``b`` pick disjoint best interpreters."""
        out = []
        for row in self.disagreement:
            if a in row.scores and b in row.scores and not row.top_choice(a) & row.top_choice(b):
                out.append(row.instance_id)
        return out


def load_corpora(config: ExperimentConfig) -> tuple[Corpus, Corpus]:
    if config.train_path is None:
        return bundled_corpus(config.corpus_seed)
    train_c = load_corpus(config.train_path, config.corpus_format, split="train")
    test_c = load_corpus(config.test_path, config.corpus_format, split="test",
                         label_map=train_c.label_map)
    return train_c, test_c


def build_instances(model: MeteredModel, seqs, labels) -> list[ClassificationInstance]:
    """Classification instances with the model's prediction cached (unmetered)."""
    probs = np.concatenate([model._probs_for(seqs[i : i + 256]) for i in range(0, len(seqs), 256)])
    return [ClassificationInstance(s, int(y), int(np.argmax(p)), p)
            for s, y, p in zip(seqs, labels, probs)]


def disagreement_rows(model: MeteredModel, instances, ids, config: ExperimentConfig,
                      vocab: Vocabulary | None) -> list[DisagreementRow]:
    icfg = replace(config.interpreter_config(), seed=config.seed + 2)
    rows = []
    for i in ids:
        inst = instances[i]
        interps = {name: fn(model, inst, icfg) for name, fn in INTERPRETERS.items()}
        scores = {}
        for metric in config.metrics:
            scores[metric.value] = {}
            for name, u in interps.items():
                s = evaluate(metric, model, inst, u, config.B)
                scores[metric.value][name] = (s.value, s.passes_used)
        words = vocab.decode(inst.tokens) if vocab is not None else [str(t) for t in inst.tokens]
        rows.append(DisagreementRow(i, words, scores))
    return rows


def run_experiment(config: ExperimentConfig) -> Report:
    """Run the full pipeline and, if ``config.output_dir`` is set, write every artifact."""
    from .report import emit_report, save_report_json

    out = Path(config.output_dir) if config.output_dir else None
    with stage("output"):
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
    with stage("corpus"):
        train_c, test_c = load_corpora(config)
    with stage("model"):
        if config.model_path:
            model = MeteredModel.load(config.model_path)
            vocab = model.vocab
            if vocab is None:
                raise ValueError("checkpoint carries no vocabulary")
        else:
            vocab = Vocabulary.build(train_c.tokens)
            model = train([vocab.encode(t) for t in train_c.tokens], train_c.label_ids,
                          config.train_config(), num_classes=train_c.num_classes, vocab=vocab)
        test_seqs = [vocab.encode(t) for t in test_c.tokens]
        test_acc = accuracy(model, test_seqs, test_c.label_ids)
        if out is not None:
            model.save(out / "model.npz")
    with stage("instances"):
        instances = build_instances(model, test_seqs, test_c.label_ids)
    with stage("golden_set"):
        if config.golden_set_path:
            golden: GoldenSet = load_golden_set(config.golden_set_path)
        else:
            golden = generate_golden_set(instances, model, config.K, config.seed + 1,
                                         config=config.interpreter_config())
        if out is not None:
            save_golden_set(golden, out / "golden_set.bin")
    diag, comp = {}, {}
    for metric in config.metrics:
        with stage(f"score:{metric.value}"):
            scores = score_pairs(metric, golden, model, config.B)
            diag[metric] = estimate_diagnosticity(metric, golden, model, config.B, scores=scores)
            comp[metric] = measure_time_complexity(metric, golden, model, config.B, scores=scores)
    with stage("disagreement"):
        n = min(config.disagreement_instances, len(instances))
        rows = disagreement_rows(model, instances, range(n), config, vocab)
    lengths = [p.instance.length for p in golden.pairs]
    meta = {
        "arch": model.arch,
        "K": len(golden),
        "seed": config.seed,
        "test_accuracy": test_acc,
        "mean_length": float(np.mean(lengths)),
        "max_length": int(np.max(lengths)),
        "interpreter_mean_passes": {
            name: float(np.mean([p for p, g in zip(golden.interpreter_passes, golden.provenance) if g == name]))
            for name in sorted(set(golden.provenance))
        },
    }
    report = Report(list(config.metrics), diag, comp, rows, meta)
    if out is not None:
        with stage("report"):
            emit_report(report, out, config.formats)
            save_report_json(report, out / "report.json")
    return report
