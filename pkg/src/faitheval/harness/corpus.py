"""Corpus loading, tokenization and the bundled synthetic sentiment corpus."""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")

FORMATS = ("csv", "tsv", "jsonl")


class CorpusError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    """Lowercase, then split on whitespace and at punctuation boundaries."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Corpus:
    texts: list[str]
    labels: list[str]
    label_map: dict[str, int]
    split: str = "train"
    tokens: list[list[str]] = field(default_factory=list)

    def __post_init__(self):
        if len(self.texts) != len(self.labels):
            raise CorpusError("texts and labels differ in length")
        missing = set(self.labels) - set(self.label_map)
        if missing:
            raise CorpusError(f"labels missing from label map: {sorted(missing)}")
        if not self.tokens:
            self.tokens = [tokenize(t) for t in self.texts]

    def __len__(self) -> int:
        return len(self.texts)

    @property
    def num_classes(self) -> int:
        return len(self.label_map)

    @property
    def label_ids(self) -> list[int]:
        return [self.label_map[lab] for lab in self.labels]


def _label_map(labels) -> dict[str, int]:
    return {lab: i for i, lab in enumerate(sorted(set(labels)))}


def make_corpus(texts, labels, split="train", label_map=None) -> Corpus:
    """Build a corpus, rejecting records that tokenize to nothing."""
    for i, text in enumerate(texts):
        if not tokenize(text):
            raise CorpusError(f"record {i + 1}: empty text")
    return Corpus(list(texts), list(labels), label_map or _label_map(labels), split)


def load_corpus(path: str | Path, fmt: str | None = None, split: str = "train",
                label_map: dict[str, int] | None = None) -> Corpus:
    """Read a CSV/TSV (header ``text,label``) or JSONL (fields text, label) corpus.

    Labels map to class indices in lexicographic order unless ``label_map``
    is given. Errors name the offending line.
    """
    path = Path(path)
    if fmt is None:
        fmt = path.suffix.lstrip(".").lower()
    if fmt not in FORMATS:
        raise CorpusError(f"unknown corpus format {fmt!r}")
    texts, labels = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        if fmt == "jsonl":
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    text, label = rec["text"], rec["label"]
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise CorpusError(f"{path}:{lineno}: malformed record ({exc})") from None
                _check_record(path, lineno, text, label)
                texts.append(text)
                labels.append(str(label))
        else:
            reader = csv.reader(fh, delimiter="\t" if fmt == "tsv" else ",")
            header = next(reader, None)
            if header is None or "text" not in header or "label" not in header:
                raise CorpusError(f"{path}:1: header must name text and label columns")
            ti, li = header.index("text"), header.index("label")
            for row in reader:
                lineno = reader.line_num
                if not row:
                    continue
                if len(row) != len(header):
                    raise CorpusError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
                _check_record(path, lineno, row[ti], row[li])
                texts.append(row[ti])
                labels.append(row[li])
    if not texts:
        raise CorpusError(f"{path}: no records")
    return Corpus(texts, labels, label_map or _label_map(labels), split)


def _check_record(path, lineno, text, label):
    if not isinstance(text, str) or not tokenize(text):
        raise CorpusError(f"{path}:{lineno}: empty text")
    if label is None or str(label) == "":
        raise CorpusError(f"{path}:{lineno}: missing label")


def save_corpus(corpus: Corpus, path: str | Path, fmt: str | None = None) -> None:
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".").lower()
    if fmt not in FORMATS:
        raise CorpusError(f"unknown corpus format {fmt!r}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if fmt == "jsonl":
            for text, label in zip(corpus.texts, corpus.labels):
                fh.write(json.dumps({"text": text, "label": label}) + "\n")
        else:
            writer = csv.writer(fh, delimiter="\t" if fmt == "tsv" else ",", lineterminator="\n")
            writer.writerow(["text", "label"])
            writer.writerows(zip(corpus.texts, corpus.labels))


POSITIVE_WORDS = (
    "good great excellent wonderful superb delightful brilliant amazing charming "
    "moving enjoyable touching clever beautiful fun"
).split()
NEGATIVE_WORDS = (
    "bad awful terrible boring dull weak poor tedious clumsy annoying "
    "bland painful mediocre ugly messy"
).split()
FILLER_WORDS = (
    "the a an this that film movie story plot cast actor actress director scene "
    "script score camera music ending moment character characters audience year "
    "time one two some many it its is was are were be has had have with of in on "
    "at to for from by as about into over after before during while and but or so "
    "very quite rather just really also still even yet then there here who which "
    "what when where how old new long short first last other another same own "
    "little big whole part half storyline dialogue setting screen theater studio "
    "budget sequel remake version genre drama comedy thriller romance action "
    "mystery western documentary animation series episode season role roles"
).split()


def synthetic_sentiment(n: int, seed: int, min_len: int = 5, max_len: int = 40,
                        split: str = "train") -> Corpus:
    """Keyword-driven two-class sentiment corpus.

    Each record mixes filler words with positive and negative keywords; the
    label is whichever polarity has more keywords. Lengths (in tokens,
    including the final period) are uniform on ``min_len..max_len``.
    """
    rng = np.random.default_rng(seed)
    texts, labels = [], []
    for _ in range(n):
        length = int(rng.integers(min_len, max_len + 1))
        words = length - 1
        n_kw = int(rng.integers(2, max(2, words // 3) + 1))
        n_minor = int(rng.integers(0, (n_kw - 1) // 2 + 1))
        n_major = n_kw - n_minor
        label = "pos" if rng.random() < 0.5 else "neg"
        major, minor = (POSITIVE_WORDS, NEGATIVE_WORDS) if label == "pos" else (NEGATIVE_WORDS, POSITIVE_WORDS)
        toks = (list(rng.choice(major, n_major)) + list(rng.choice(minor, n_minor))
                + list(rng.choice(FILLER_WORDS, words - n_kw)))
        rng.shuffle(toks)
        texts.append(" ".join(str(t) for t in toks) + " .")
        labels.append(label)
    return make_corpus(texts, labels, split=split, label_map={"neg": 0, "pos": 1})


def bundled_corpus(seed: int = 0) -> tuple[Corpus, Corpus]:
    """The default 2,000 / 500 train/test synthetic corpus."""
    return (synthetic_sentiment(2000, seed, split="train"),
            synthetic_sentiment(500, seed + 1000, split="test"))
