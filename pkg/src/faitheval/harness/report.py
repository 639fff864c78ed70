"""Render an experiment report as markdown tables, CSV files and an SVG scatter plot."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from ..diagnosticity import ComplexityReport, DiagnosticityEstimate
from ..metrics import Metric
from .experiment import DisagreementRow, Report

DIAGNOSTICITY_COLUMNS = ["metric", "diagnosticity", "std_err", "mean_passes", "min_passes", "max_passes"]
COMPLEXITY_COLUMNS = ["metric", "mean_passes", "min_passes", "max_passes"]
SCORE_COLUMNS = ["instance", "metric", "interpreter", "value", "passes_used"]
RANK_COLUMNS = ["instance", "metric", "interpreter", "rank"]


def _num(x: float) -> str:
    return repr(float(x))


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def diagnosticity_csv(report: Report) -> str:
    rows = []
    for m in report.metrics:
        d, c = report.diagnosticity[m], report.complexity[m]
        rows.append([m.value, _num(d.value), _num(d.standard_error), _num(c.mean_passes),
                     c.min_passes, c.max_passes])
    return _csv(rows, DIAGNOSTICITY_COLUMNS)


def complexity_csv(report: Report) -> str:
    rows = [[m.value, _num(c.mean_passes), c.min_passes, c.max_passes]
            for m, c in ((m, report.complexity[m]) for m in report.metrics)]
    return _csv(rows, COMPLEXITY_COLUMNS)


def disagreement_scores_csv(report: Report) -> str:
    rows = []
    for row in report.disagreement:
        for metric in (m.value for m in report.metrics):
            for name, (value, passes) in sorted(row.scores[metric].items()):
                rows.append([row.instance_id, metric, name, _num(value), passes])
    return _csv(rows, SCORE_COLUMNS)


def disagreement_ranks_csv(report: Report) -> str:
    rows = []
    for row in report.disagreement:
        for metric in (m.value for m in report.metrics):
            for name, rank in sorted(row.ranks(metric).items()):
                rows.append([row.instance_id, metric, name, rank])
    return _csv(rows, RANK_COLUMNS)


def render_markdown(report: Report, max_examples: int = 5) -> str:
    meta = report.meta
    out = ["# Faithfulness metric evaluation", ""]
    if meta:
        out.append(f"Model: `{meta.get('arch')}` (test accuracy {meta.get('test_accuracy', float('nan')):.3f}); "
                   f"golden set size K = {meta.get('K')}; seed {meta.get('seed')}; "
                   f"mean instance length {meta.get('mean_length', float('nan')):.2f}.")
        out.append("")
    out += ["## Diagnosticity", "",
            "| Metric | Diagnosticity | Std. err. |", "|---|---:|---:|"]
    for m in report.metrics:
        d = report.diagnosticity[m]
        out.append(f"| {m.value} | {d.value:.4f} | {d.standard_error:.4f} |")
    out += ["", "## Time complexity (forward passes per instance)", "",
            "| Metric | Mean | Min | Max |", "|---|---:|---:|---:|"]
    for m in report.metrics:
        c = report.complexity[m]
        out.append(f"| {m.value} | {c.mean_passes:.2f} | {c.min_passes} | {c.max_passes} |")

    names = sorted({n for m in report.metrics for n in report.diagnosticity[m].by_interpreter})
    if names:
        out += ["", "## Diagnosticity by generating interpreter", "",
                "| Metric | " + " | ".join(names) + " |",
                "|---|" + "---:|" * len(names)]
        for m in report.metrics:
            by = report.diagnosticity[m].by_interpreter
            out.append(f"| {m.value} | " + " | ".join(f"{by.get(n, float('nan')):.3f}" for n in names) + " |")

    out += ["", "## Per-instance disagreement between metrics", ""]
    conflicts = report.conflicting_instances()
    metric_names = [m.value for m in report.metrics]
    out.append(f"Instances where SUFF and DFFOT pick different best interpreters: "
               f"{len(conflicts)} of {len(report.disagreement)}.")
    shown = [r for r in report.disagreement if r.instance_id in set(conflicts)][:max_examples]
    if not shown:
        shown = report.disagreement[:max_examples]
    for row in shown:
        out += ["", f"Instance {row.instance_id}: {' '.join(row.tokens)}", "",
                "| Interpreter | " + " | ".join(metric_names) + " |",
                "|---|" + "---:|" * len(metric_names)]
        ranks = {m: row.ranks(m) for m in metric_names}
        for name in sorted(row.scores[metric_names[0]]):
            out.append(f"| {name} | " + " | ".join(str(ranks[m][name]) for m in metric_names) + " |")
    out += ["", "Ranks: 1 is the interpretation the metric judges most faithful.", "",
            "## Diagnosticity vs time complexity", "", "![scatter](scatter.svg)", ""]
    return "\n".join(out)


def render_svg(report: Report, width: int = 480, height: int = 360) -> str:
    pts = report.scatter_points()
    left, right, top, bottom = 60, 20, 20, 50
    xs = [p[1] for p in pts] or [1.0]
    xmax = max(xs) * 1.1 if max(xs) > 0 else 1.0
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + pw * x / xmax

    def sy(y):
        return top + ph * (1.0 - y)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in np.linspace(0, 1, 6):
        parts.append(f'<text x="{left - 6}" y="{sy(t) + 4:.2f}" text-anchor="end">{t:.1f}</text>')
    for t in np.linspace(0, xmax, 6):
        parts.append(f'<text x="{sx(t):.2f}" y="{top + ph + 16}" text-anchor="middle">{t:.1f}</text>')
    parts.append(f'<text x="{left + pw / 2}" y="{height - 10}" text-anchor="middle">'
                 'mean forward passes</text>')
    parts.append(f'<text x="14" y="{top + ph / 2}" text-anchor="middle" '
                 f'transform="rotate(-90 14 {top + ph / 2})">diagnosticity</text>')
    for name, x, y in pts:
        parts.append(f'<g class="point" data-metric="{escape(name)}">'
                     f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="4" fill="steelblue"/>'
                     f'<text x="{sx(x) + 6:.2f}" y="{sy(y) - 6:.2f}">{escape(name)}</text></g>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_report(report: Report, out_dir: str | Path,
                formats=("markdown", "csv", "svg")) -> list[Path]:
    """Write the requested formats into ``out_dir``; returns the files written."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []

    def put(name, text):
        path = out / name
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        written.append(path)

    if "markdown" in formats:
        put("report.md", render_markdown(report))
    if "csv" in formats:
        put("diagnosticity.csv", diagnosticity_csv(report))
        put("complexity.csv", complexity_csv(report))
        put("disagreement_scores.csv", disagreement_scores_csv(report))
        put("disagreement_ranks.csv", disagreement_ranks_csv(report))
    if "svg" in formats:
        put("scatter.svg", render_svg(report))
    return written


def save_report_json(report: Report, path: str | Path) -> None:
    data = {
        "metrics": [m.value for m in report.metrics],
        "diagnosticity": {m.value: {"value": d.value, "standard_error": d.standard_error,
                                    "sample_count": d.sample_count,
                                    "by_interpreter": dict(d.by_interpreter)}
                          for m, d in report.diagnosticity.items()},
        "complexity": {m.value: {"mean": c.mean_passes, "min": c.min_passes, "max": c.max_passes}
                       for m, c in report.complexity.items()},
        "disagreement": [{"instance": r.instance_id, "tokens": r.tokens,
                          "scores": {m: {n: list(v) for n, v in s.items()} for m, s in r.scores.items()}}
                         for r in report.disagreement],
        "meta": report.meta,
    }
    Path(path).write_text(json.dumps(data, indent=1, sort_keys=True), encoding="utf-8")


def load_report_json(path: str | Path) -> Report:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    metrics = [Metric(m) for m in data["metrics"]]
    diag = {Metric(k): DiagnosticityEstimate(Metric(k), v["value"], v["standard_error"],
                                             v["sample_count"], np.array([]), v["by_interpreter"])
            for k, v in data["diagnosticity"].items()}
    comp = {Metric(k): ComplexityReport(Metric(k), v["mean"], v["min"], v["max"])
            for k, v in data["complexity"].items()}
    rows = [DisagreementRow(r["instance"], r["tokens"],
                            {m: {n: (float(v[0]), int(v[1])) for n, v in s.items()}
                             for m, s in r["scores"].items()})
            for r in data["disagreement"]]
    return Report(metrics, diag, comp, rows, data["meta"])
