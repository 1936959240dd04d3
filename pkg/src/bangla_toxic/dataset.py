"""Labelled comment files, train/test splits and k-fold partitions."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ArgumentError, RowError, SchemaError
from .tensor_core import SeededRng
from .text import clean_text

FLAG_COLUMNS = ("threat", "obscene", "insult", "racism")
BINARY_SCHEMA = "binary-label"
FLAG_SCHEMA = "category-flags"

_TRUE = {"1", "true", "yes", "y", "t"}
_FALSE = {"0", "false", "no", "n", "f", ""}


@dataclass(frozen=True)
class LabeledComment:
    text: str
    label: int
    threat: Optional[bool] = None
    obscene: Optional[bool] = None
    insult: Optional[bool] = None
    racism: Optional[bool] = None

    @classmethod
    def from_flags(cls, text: str, threat: bool, obscene: bool, insult: bool, racism: bool):
        label = int(threat or obscene or insult or racism)
        return cls(text, label, bool(threat), bool(obscene), bool(insult), bool(racism))


@dataclass
class LoadReport:
    path: str
    schema: str
    n: int = 0
    toxic: int = 0
    nontoxic: int = 0
    dropped_empty: int = 0
    dropped_lines: list = field(default_factory=list)

    def to_text(self) -> str:
        lines = [
            "# bangla-toxic load report v1",
            f"path: {self.path}",
            f"schema: {self.schema}",
            f"n: {self.n}",
            f"toxic: {self.toxic}",
            f"nontoxic: {self.nontoxic}",
            f"dropped_empty: {self.dropped_empty}",
        ]
        if self.dropped_lines:
            lines.append("dropped_lines: " + ",".join(str(i) for i in self.dropped_lines))
        return "\n".join(lines) + "\n"


def _parse_bool(value: str, line: int, column: str) -> bool:
    v = value.strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise RowError(line, f"column {column!r}: expected 0/1, got {value!r}")


def load_dataset(path, schema: str | None = None) -> tuple[list[LabeledComment], LoadReport]:
    """Read a UTF-8 CSV with header ``text,label`` or ``text,<four flags>``.

    ``schema`` may be forced; by default it is inferred from the header.
    Rows whose text is empty after cleaning are dropped and counted.
    """
    path = Path(path)
    with path.open(encoding="utf-8-sig", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a header row") from None
        expect = "expected header (text,label) or (text,threat,obscene,insult,racism)"
        if "text" not in header:
            raise SchemaError(f"{path}: no 'text' column; {expect}; got {header}")
        has_flags = all(c in header for c in FLAG_COLUMNS)
        if schema is None:
            schema = FLAG_SCHEMA if has_flags else BINARY_SCHEMA
        if schema == FLAG_SCHEMA and not has_flags:
            missing = [c for c in FLAG_COLUMNS if c not in header]
            raise SchemaError(f"{path}: missing flag columns {missing}; {expect}")
        if schema == BINARY_SCHEMA and "label" not in header:
            raise SchemaError(f"{path}: no 'label' column; {expect}; got {header}")
        if schema not in (FLAG_SCHEMA, BINARY_SCHEMA):
            raise SchemaError(f"unknown schema {schema!r}")

        col = {name: i for i, name in enumerate(header)}
        report = LoadReport(str(path), schema)
        comments = []
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise RowError(line, f"expected {len(header)} fields, got {len(row)}")
            text = row[col["text"]]
            if schema == FLAG_SCHEMA:
                flags = [_parse_bool(row[col[c]], line, c) for c in FLAG_COLUMNS]
                item = LabeledComment.from_flags(text, *flags)
            else:
                item = LabeledComment(text, int(_parse_bool(row[col["label"]], line, "label")))
            if not clean_text(text):
                report.dropped_empty += 1
                report.dropped_lines.append(line)
                continue
            comments.append(item)
    report.n = len(comments)
    report.toxic = sum(c.label for c in comments)
    report.nontoxic = report.n - report.toxic
    return comments, report


def write_dataset(path, comments, schema: str = BINARY_SCHEMA) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        if schema == FLAG_SCHEMA:
            w.writerow(["text", *FLAG_COLUMNS])
            for c in comments:
                w.writerow([c.text, *(int(bool(getattr(c, f))) for f in FLAG_COLUMNS)])
        else:
            w.writerow(["text", "label"])
            for c in comments:
                w.writerow([c.text, c.label])


@dataclass(frozen=True)
class DatasetSplit:
    train_indices: np.ndarray
    test_indices: np.ndarray


def split(n: int, rng: SeededRng, ratio: float = 0.8) -> DatasetSplit:
    """Shuffle ``0..n-1``; the first ``floor(ratio * n)`` go to training."""
    if n < 2:
        raise ArgumentError(f"need at least 2 samples to split, got {n}")
    if not 0 < ratio < 1:
        raise ArgumentError(f"ratio must be in (0, 1), got {ratio}")
    perm = rng.permutation(n)
    # guards products like 0.57 * 100 == 56.99999999999999
    n_train = math.floor(ratio * n + 1e-9)
    return DatasetSplit(perm[:n_train], perm[n_train:])


@dataclass(frozen=True)
class FoldPlan:
    k: int
    folds: tuple

    def train_indices(self, fold: int) -> np.ndarray:
        return np.concatenate([f for i, f in enumerate(self.folds) if i != fold])


def kfold(n: int, rng: SeededRng, k: int = 5) -> FoldPlan:
    """Deal a shuffled permutation into ``k`` folds; the first ``n % k`` get one extra."""
    if k < 2:
        raise ArgumentError(f"k must be >= 2, got {k}")
    if k > n:
        raise ArgumentError(f"k={k} exceeds number of samples n={n}")
    perm = rng.permutation(n)
    base, extra = divmod(n, k)
    folds, start = [], 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        folds.append(perm[start : start + size])
        start += size
    return FoldPlan(k, tuple(folds))


# Disjoint word pools for the synthetic fixture corpus.
TOXIC_POOL = (
    "শালা", "কুত্তা", "বেয়াদব", "হারামি", "বদমাশ", "জানোয়ার", "ফালতু", "ছাগল",
    "গাধা", "নোংরা", "বেহায়া", "লুচ্চা", "মিথ্যুক", "শয়তান", "চোর", "বাটপার",
)
NONTOXIC_POOL = (
    "ভালো", "সুন্দর", "ধন্যবাদ", "শুভেচ্ছা", "চমৎকার", "অসাধারণ", "বন্ধু", "আনন্দ",
    "শান্তি", "ভালোবাসা", "সকাল", "বই", "গান", "নদী", "আকাশ", "ফুল",
)


def synth_corpus(n: int, rng: SeededRng, min_words: int = 3, max_words: int = 8) -> list[LabeledComment]:
    """Balanced separable corpus: toxic rows draw only from ``TOXIC_POOL``."""
    if n < 2 or n % 2:
        raise ArgumentError(f"n must be even and >= 2, got {n}")
    out = []
    for i in range(n):
        label = i % 2
        pool = TOXIC_POOL if label else NONTOXIC_POOL
        length = int(rng.integers(min_words, max_words + 1))
        words = rng.choice(pool, size=length)
        out.append(LabeledComment(" ".join(words), label))
    return out
