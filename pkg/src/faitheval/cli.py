"""Command line entry point: ``faitheval {train,interpret,evaluate,diag,report,corpus}``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .core import ClassificationInstance, as_interpretation
from .harness.config import ConfigError, ExperimentConfig, dump_config, load_config
from .harness.corpus import bundled_corpus, save_corpus, tokenize
from .harness.experiment import ExperimentError, load_corpora, run_experiment
from .harness.report import emit_report, load_report_json
from .interpreters import INTERPRETERS
from .metrics import evaluate, parse_metrics
from .models import MeteredModel, Vocabulary, accuracy, train

FORMATS = ("markdown", "csv", "svg")


def _config(args) -> ExperimentConfig:
    overrides = {
        "seed": getattr(args, "seed", None),
        "arch": getattr(args, "model", None),
        "metrics": parse_metrics(args.metrics) if getattr(args, "metrics", None) else None,
        "K": getattr(args, "k", None),
        "output_dir": getattr(args, "out", None),
        "formats": tuple(args.format) if getattr(args, "format", None) else None,
    }
    if getattr(args, "config", None):
        return load_config(args.config, **overrides)
    return ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})


def _add_common(p, *, experiment=True):
    p.add_argument("--config", help="flat key = value experiment config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--model", choices=["linear", "cnn"], help="architecture to train")
    if experiment:
        p.add_argument("--metrics", help="comma-separated metric names")
        p.add_argument("--k", type=int, help="golden set size")
        p.add_argument("--format", choices=FORMATS, action="append",
                       help="report format (repeatable); default all")
    p.add_argument("--out", help="output directory")


def cmd_train(args) -> int:
    cfg = _config(args)
    train_c, test_c = load_corpora(cfg)
    vocab = Vocabulary.build(train_c.tokens)
    model = train([vocab.encode(t) for t in train_c.tokens], train_c.label_ids,
                  cfg.train_config(), num_classes=train_c.num_classes, vocab=vocab)
    acc = accuracy(model, [vocab.encode(t) for t in test_c.tokens], test_c.label_ids)
    out = Path(cfg.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / "model.npz")
    print(f"trained {model.arch}: final loss {model.train_history[-1]:.6f}, test accuracy {acc:.4f}")
    print(f"wrote {out / 'model.npz'}")
    return 0


def _instance(model: MeteredModel, text: str) -> ClassificationInstance:
    toks = model.vocab.encode(tokenize(text))
    if not toks:
        raise SystemExit("text has no tokens")
    pred = model.predict(toks)
    model.reset_passes()
    return ClassificationInstance(toks, pred.predicted_class, pred.predicted_class, pred.probs)


def _interpretation(args, model, inst) -> tuple[str, np.ndarray]:
    if args.scores:
        return "given", as_interpretation([float(s) for s in args.scores.split(",")], inst.length)
    cfg = _config(args).interpreter_config()
    return args.method, INTERPRETERS[args.method](model, inst, cfg)


def cmd_interpret(args) -> int:
    model = MeteredModel.load(args.model_path)
    inst = _instance(model, args.text)
    words = model.vocab.decode(inst.tokens)
    methods = [args.method] if args.method else list(INTERPRETERS)
    cfg = _config(args).interpreter_config()
    table = {m: INTERPRETERS[m](model, inst, cfg) for m in methods}
    print(f"predicted class {inst.predicted_class} (p = {inst.predicted_prob:.4f})")
    print("token".ljust(16) + "".join(m.rjust(12) for m in methods))
    for i, w in enumerate(words):
        print(w[:15].ljust(16) + "".join(f"{table[m][i]:12.5f}" for m in methods))
    return 0


def cmd_evaluate(args) -> int:
    model = MeteredModel.load(args.model_path)
    inst = _instance(model, args.text)
    source, u = _interpretation(args, model, inst)
    cfg = _config(args)
    print(f"interpretation: {source}")
    print("metric".ljust(8) + "value".rjust(12) + "passes".rjust(8))
    for metric in cfg.metrics:
        s = evaluate(metric, model, inst, u, cfg.B)
        print(metric.value.ljust(8) + f"{s.value:12.5f}" + f"{s.passes_used:8d}")
    return 0


def cmd_diag(args) -> int:
    cfg = _config(args)
    if cfg.output_dir is None:
        cfg = replace(cfg, output_dir="faitheval-out")
    report = run_experiment(cfg)
    print(f"{'metric':8}{'diag':>10}{'se':>9}{'passes':>9}")
    for m in report.metrics:
        d, c = report.diagnosticity[m], report.complexity[m]
        print(f"{m.value:8}{d.value:10.4f}{d.standard_error:9.4f}{c.mean_passes:9.2f}")
    print(f"wrote report to {cfg.output_dir}")
    return 0


def cmd_report(args) -> int:
    src = Path(args.out)
    report = load_report_json(src / "report.json")
    formats = tuple(args.format) if args.format else FORMATS
    for path in emit_report(report, src, formats):
        print(f"wrote {path}")
    return 0


def cmd_corpus(args) -> int:
    train_c, test_c = bundled_corpus(args.seed or 0)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    save_corpus(train_c, out / f"train.{args.corpus_format}")
    save_corpus(test_c, out / f"test.{args.corpus_format}")
    (out / "experiment.cfg").write_text(dump_config(ExperimentConfig()), encoding="utf-8")
    print(f"wrote bundled corpus to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="faitheval", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a classifier and save model.npz")
    _add_common(p, experiment=False)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("interpret", help="per-token scores for one text")
    _add_common(p, experiment=False)
    p.add_argument("--model-path", required=True)
    p.add_argument("--method", choices=list(INTERPRETERS))
    p.add_argument("text")
    p.set_defaults(func=cmd_interpret)

    p = sub.add_parser("evaluate", help="faithfulness metrics of one interpretation")
    _add_common(p, experiment=False)
    p.add_argument("--metrics", help="comma-separated metric names")
    p.add_argument("--model-path", required=True)
    p.add_argument("--method", choices=list(INTERPRETERS), default="WO")
    p.add_argument("--scores", help="comma-separated scores to evaluate instead of a method")
    p.add_argument("text")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("diag", help="full diagnosticity and complexity pipeline")
    _add_common(p)
    p.set_defaults(func=cmd_diag)

    p = sub.add_parser("report", help="re-render report files from report.json")
    p.add_argument("--out", required=True, help="directory holding report.json")
    p.add_argument("--format", choices=FORMATS, action="append")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("corpus", help="write the bundled synthetic corpus and a default config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--corpus-format", choices=["csv", "tsv", "jsonl"], default="csv")
    p.set_defaults(func=cmd_corpus)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ExperimentError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
