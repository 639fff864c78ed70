import csv
import json
import re

import numpy as np
import pytest

from faitheval.cli import main
from faitheval.harness.config import (ConfigError, ExperimentConfig, dump_config, load_config,
                                      parse_config_text)
from faitheval.harness.corpus import (CorpusError, bundled_corpus, load_corpus, make_corpus,
                                      save_corpus, synthetic_sentiment, tokenize)
from faitheval.harness.experiment import (DisagreementRow, ExperimentError, rank_interpreters,
                                          run_experiment)
from faitheval.harness.report import (DIAGNOSTICITY_COLUMNS, emit_report, load_report_json,
                                      render_markdown, render_svg)
from faitheval.metrics import ALL_METRICS, Metric

SMALL = dict(arch="linear", epochs=2, K=60, lime_samples=30, ig_steps=4, disagreement_instances=6)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestTokenize:
    @pytest.mark.parametrize("text,expected", [
        ("A cop story.", ["a", "cop", "story", "."]),
        ("", []),
        ("Hello, hello", ["hello", ",", "hello"]),
        ("  it's\tfine!!", ["it", "'", "s", "fine", "!", "!"]),
    ])
    def test_examples(self, text, expected):
        assert tokenize(text) == expected


class TestCorpus:
    def test_lexicographic_labels(self, tmp_path):
        p = write(tmp_path / "c.csv", "text,label\ngreat film,pos\nawful,neg\nfine fine,pos\n")
        c = load_corpus(p)
        assert len(c) == 3 and c.num_classes == 2
        assert c.label_map == {"neg": 0, "pos": 1}
        assert c.label_ids == [1, 0, 1]

    def test_empty_text_names_line(self, tmp_path):
        p = write(tmp_path / "c.csv", "text,label\ngood,pos\n  ,neg\n")
        with pytest.raises(CorpusError, match=r"c\.csv:3: empty text"):
            load_corpus(p)
        p = write(tmp_path / "c.jsonl", '{"text": "ok", "label": "a"}\n{"text": "...", "label": "b"}\n'
                                        '{"text": "", "label": "b"}\n')
        with pytest.raises(CorpusError, match=r":3: empty text"):
            load_corpus(p)

    def test_malformed_rows(self, tmp_path):
        with pytest.raises(CorpusError, match=":2:"):
            load_corpus(write(tmp_path / "a.jsonl", '{"text": "x", "label": "y"}\n{oops\n'))
        with pytest.raises(CorpusError, match=":3:"):
            load_corpus(write(tmp_path / "a.csv", "text,label\nx,y\nx,y,z\n"))
        with pytest.raises(CorpusError, match="header"):
            load_corpus(write(tmp_path / "b.csv", "words,class\nx,y\n"))

    def test_unknown_format(self, tmp_path):
        with pytest.raises(CorpusError, match="unknown corpus format"):
            load_corpus(write(tmp_path / "c.xml", "<x/>"))

    @pytest.mark.parametrize("fmt", ["csv", "tsv", "jsonl"])
    def test_formats_equivalent(self, tmp_path, fmt):
        ref = make_corpus(['He said "hi", then left.', "tab\tinside", "plain"], ["b", "a", "b"])
        save_corpus(ref, tmp_path / f"c.{fmt}")
        c = load_corpus(tmp_path / f"c.{fmt}")
        assert (c.texts, c.labels, c.label_map, c.tokens) == (ref.texts, ref.labels, ref.label_map, ref.tokens)

    def test_bundled_corpus(self):
        tr, te = bundled_corpus(0)
        assert (len(tr), len(te)) == (2000, 500)
        lengths = [len(t) for t in tr.tokens + te.tokens]
        assert min(lengths) >= 5 and max(lengths) <= 40
        assert tr.label_map == {"neg": 0, "pos": 1}
        assert 0.3 < np.mean(tr.label_ids) < 0.7
        again = synthetic_sentiment(2000, 0)
        assert again.texts == tr.texts


class TestConfig:
    def test_parse(self):
        text = "# comment\narch = linear\nK = 50  # trailing\nmetrics = comp, suff\nB = 10,50\nmodel_path = none\n"
        values = parse_config_text(text)
        assert values == {"arch": "linear", "K": 50, "metrics": ("comp", "suff"),
                          "B": ("10", "50"), "model_path": None}
        cfg = ExperimentConfig(**values)
        assert cfg.metrics == (Metric.COMP, Metric.SUFF) and cfg.B == (10.0, 50.0)

    @pytest.mark.parametrize("text,msg", [("nonsense\n", "line 1"), ("K = 3\nfoo = 1\n", "line 2"),
                                          ("K = many\n", "line 1")])
    def test_errors(self, text, msg):
        with pytest.raises(ConfigError, match=msg):
            parse_config_text(text)

    def test_missing_path_and_bad_values(self, tmp_path):
        with pytest.raises(ConfigError, match="does not exist"):
            ExperimentConfig(train_path=str(tmp_path / "nope.csv"), test_path=str(tmp_path / "x"))
        with pytest.raises(ConfigError):
            ExperimentConfig(K=0)
        with pytest.raises(ConfigError):
            ExperimentConfig(formats=("pdf",))

    def test_dump_round_trip(self, tmp_path):
        cfg = ExperimentConfig(arch="linear", K=7, metrics=("DFMIT", "MONO"), seed=3)
        p = write(tmp_path / "e.cfg", dump_config(cfg))
        assert load_config(p) == cfg
        assert load_config(p, K=9).K == 9


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    report = run_experiment(ExperimentConfig(output_dir=str(out), **SMALL))
    return out, report


class TestExperiment:
    def test_report_completeness(self, run_dir):
        _, report = run_dir
        assert report.metrics == list(ALL_METRICS)
        assert set(report.diagnosticity) == set(report.complexity) == set(ALL_METRICS)
        assert [p[0] for p in report.scatter_points()] == [m.value for m in ALL_METRICS]
        for m in ALL_METRICS:
            assert 0.0 <= report.diagnosticity[m].value <= 1.0
            assert all(set(row.scores) == {x.value for x in ALL_METRICS} for row in report.disagreement)
        assert report.complexity[Metric.DFMIT].mean_passes == 1.0

    def test_files(self, run_dir):
        out, _ = run_dir
        for name in ("report.md", "diagnosticity.csv", "complexity.csv", "scatter.svg",
                     "golden_set.bin", "model.npz", "report.json",
                     "disagreement_scores.csv", "disagreement_ranks.csv"):
            assert (out / name).is_file(), name

    def test_markdown_and_svg_shape(self, run_dir):
        out, _ = run_dir
        md = (out / "report.md").read_text()
        section = md.split("## Diagnosticity\n")[1].split("##")[0]
        rows = [l for l in section.splitlines() if l.startswith("| ") and not l.startswith("| Metric")]
        assert len(rows) == 6
        svg = (out / "scatter.svg").read_text()
        assert len(re.findall(r'<g class="point" data-metric="(\w+)">', svg)) == 6
        for m in ALL_METRICS:
            assert f">{m.value}</text>" in svg

    def test_csv_schema(self, run_dir):
        out, _ = run_dir
        with open(out / "diagnosticity.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == DIAGNOSTICITY_COLUMNS
        assert [r[0] for r in rows[1:]] == [m.value for m in ALL_METRICS]

    def test_rerun_byte_identical(self, run_dir, tmp_path):
        out, _ = run_dir
        run_experiment(ExperimentConfig(output_dir=str(tmp_path), **SMALL))
        for name in ("diagnosticity.csv", "complexity.csv", "disagreement_scores.csv",
                     "disagreement_ranks.csv"):
            assert (out / name).read_bytes() == (tmp_path / name).read_bytes(), name

    def test_ranks_recomputable_from_scores(self, run_dir):
        out, _ = run_dir
        values = {}
        with open(out / "disagreement_scores.csv", newline="") as fh:
            for r in csv.DictReader(fh):
                values.setdefault((r["instance"], r["metric"]), {})[r["interpreter"]] = float(r["value"])
        with open(out / "disagreement_ranks.csv", newline="") as fh:
            ranks = list(csv.DictReader(fh))
        assert len(ranks) == sum(len(v) for v in values.values())
        for r in ranks:
            vals = values[(r["instance"], r["metric"])]
            metric = Metric(r["metric"])
            mine = vals[r["interpreter"]]
            better = sum((v > mine) if metric.higher_is_faithful else (v < mine) for v in vals.values())
            assert int(r["rank"]) == better + 1

    def test_reuse_saved_model_and_golden_set(self, run_dir, tmp_path):
        out, report = run_dir
        again = run_experiment(ExperimentConfig(model_path=str(out / "model.npz"),
                                                golden_set_path=str(out / "golden_set.bin"), **SMALL))
        for m in ALL_METRICS:
            assert again.diagnosticity[m].value == report.diagnosticity[m].value

    def test_report_json_round_trip(self, run_dir, tmp_path):
        out, report = run_dir
        loaded = load_report_json(out / "report.json")
        assert render_markdown(loaded) == render_markdown(report)
        assert render_svg(loaded) == render_svg(report)

    def test_metric_subset(self, tmp_path):
        cfg = ExperimentConfig(output_dir=str(tmp_path), formats=("csv",),
                               **{**SMALL, "K": 12, "metrics": ("COMP", "DFMIT")})
        report = run_experiment(cfg)
        assert [p[0] for p in report.scatter_points()] == ["COMP", "DFMIT"]
        assert not (tmp_path / "report.md").exists()
        rows = (tmp_path / "diagnosticity.csv").read_text().splitlines()
        assert len(rows) == 3

    def test_stage_labelled_errors(self, tmp_path):
        bad = write(tmp_path / "bad.npz", "not a checkpoint")
        with pytest.raises(ExperimentError, match=r"^\[model\]"):
            run_experiment(ExperimentConfig(model_path=str(bad), **SMALL))
        blocker = write(tmp_path / "file", "x")
        with pytest.raises(ExperimentError, match=r"^\[output\]"):
            run_experiment(ExperimentConfig(output_dir=str(blocker / "sub"), **SMALL))

    def test_emit_report_unwritable(self, run_dir, tmp_path):
        _, report = run_dir
        blocker = write(tmp_path / "f", "x")
        with pytest.raises(OSError):
            emit_report(report, blocker / "sub")


class TestRanking:
    def test_orientation_and_ties(self):
        assert rank_interpreters(Metric.SUFF, {"a": 0.1, "b": 0.3, "c": 0.1}) == {"a": 1, "b": 3, "c": 1}
        assert rank_interpreters(Metric.COMP, {"a": 0.1, "b": 0.3, "c": 0.1}) == {"a": 2, "b": 1, "c": 2}

    def test_top_choice_conflict(self):
        row = DisagreementRow(0, ["x"], {"SUFF": {"a": (0.0, 5), "b": (0.2, 5)},
                                         "DFFOT": {"a": (0.9, 2), "b": (0.1, 1)}})
        assert row.top_choice("SUFF") == {"a"} and row.top_choice("DFFOT") == {"b"}


@pytest.fixture(scope="module")
def model_path(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli")
    assert main(["train", "--model", "linear", "--out", str(out)]) == 0
    return out / "model.npz"


class TestCli:
    def test_train_output(self, model_path):
        assert model_path.is_file()

    def test_interpret_table(self, model_path, capsys):
        assert main(["interpret", "--model-path", str(model_path), "a great and moving film"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("predicted class")
        assert lines[1].split() == ["token", "LIME", "WO", "SA_mu", "SA_l2", "IG_mu", "IG_l2"]
        assert [l.split()[0] for l in lines[2:]] == ["a", "great", "and", "moving", "film"]

    def test_evaluate_with_scores(self, model_path, capsys):
        assert main(["evaluate", "--model-path", str(model_path), "--metrics", "dfmit,corr",
                     "--scores", "0.1,0.9,0.2", "dull but fine"]) == 0
        out = capsys.readouterr().out
        assert "DFMIT" in out and "CORR" in out and "SUFF" not in out

    def test_evaluate_bad_scores(self, model_path, capsys):
        assert main(["evaluate", "--model-path", str(model_path), "--scores", "1,2", "one two three"]) == 2
        assert "error" in capsys.readouterr().err

    def test_diag_and_report(self, tmp_path, capsys):
        cfg = write(tmp_path / "e.cfg", dump_config(ExperimentConfig(**SMALL)))
        out = tmp_path / "out"
        assert main(["diag", "--config", str(cfg), "--k", "20", "--seed", "4", "--out", str(out),
                     "--format", "csv"]) == 0
        assert (out / "diagnosticity.csv").is_file() and not (out / "report.md").exists()
        assert json.loads((out / "report.json").read_text())["meta"]["K"] == 20
        assert main(["report", "--out", str(out), "--format", "markdown", "--format", "svg"]) == 0
        assert (out / "report.md").is_file() and (out / "scatter.svg").is_file()

    def test_corpus_command(self, tmp_path):
        assert main(["corpus", "--out", str(tmp_path), "--corpus-format", "jsonl"]) == 0
        cfg = load_config(tmp_path / "experiment.cfg")
        assert cfg == ExperimentConfig()
        assert len(load_corpus(tmp_path / "test.jsonl")) == 500

    def test_missing_config(self, tmp_path, capsys):
        assert main(["diag", "--config", str(tmp_path / "none.cfg")]) == 2
