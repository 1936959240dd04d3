"""Confusion matrices, accuracy / precision / recall / F1 and text reports."""

from __future__ import annotations

import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, CompatibilityError, ShapeError


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def confusion(preds, labels) -> ConfusionMatrix:
    """Counts with toxic (1) as the positive class."""
    p = np.asarray(preds).astype(np.int64).reshape(-1)
    y = np.asarray(labels).astype(np.int64).reshape(-1)
    if p.shape != y.shape:
        raise ShapeError(f"{p.size} predictions vs {y.size} labels")
    if p.size == 0:
        raise ShapeError("cannot build a confusion matrix from empty vectors")
    return ConfusionMatrix(
        tp=int(np.sum((p == 1) & (y == 1))),
        tn=int(np.sum((p == 0) & (y == 0))),
        fp=int(np.sum((p == 1) & (y == 0))),
        fn=int(np.sum((p == 0) & (y == 1))),
    )


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise ArgumentError("accuracy of an empty confusion matrix")
    return (cm.tp + cm.tn) / cm.total


def precision(cm: ConfusionMatrix) -> float:
    """tp / (tp + fp); 0.0 when nothing was predicted positive."""
    d = cm.tp + cm.fp
    return cm.tp / d if d else 0.0


def recall(cm: ConfusionMatrix) -> float:
    """tp / (tp + fn); 0.0 when there are no actual positives."""
    d = cm.tp + cm.fn
    return cm.tp / d if d else 0.0


def f_score(p: float, r: float) -> float:
    if not (0.0 <= p <= 1.0 and 0.0 <= r <= 1.0):
        raise ArgumentError(f"precision/recall must lie in [0, 1], got {p}, {r}")
    if p + r == 0:
        return 0.0
    return 2.0 * p * r / (p + r)


@dataclass
class MetricsReport:
    cm: ConfusionMatrix
    accuracy: float
    precision: float
    recall: float
    f1: float
    precision_degenerate: bool = False
    recall_degenerate: bool = False
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_cm(cls, cm: ConfusionMatrix, **meta) -> "MetricsReport":
        p, r = precision(cm), recall(cm)
        return cls(
            cm, accuracy(cm), p, r, f_score(p, r),
            precision_degenerate=(cm.tp + cm.fp == 0),
            recall_degenerate=(cm.tp + cm.fn == 0),
            meta=dict(meta),
        )

    @classmethod
    def from_predictions(cls, preds, labels, **meta) -> "MetricsReport":
        return cls.from_cm(confusion(preds, labels), **meta)

    def row(self, method: str) -> str:
        return f"{method}\t{self.accuracy:.4f}\t{self.f1:.4f}\t{self.precision:.4f}\t{self.recall:.4f}"


TABLE_HEADER = "Method\tAccuracy\tF1 Score\tPrecision\tRecall"


def mean_sd(values) -> tuple[float, float]:
    """Arithmetic mean and sample standard deviation (0.0 for one value)."""
    vals = [float(v) for v in values]
    if not vals:
        raise ArgumentError("no values to aggregate")
    sd = statistics.stdev(vals) if len(vals) > 1 else 0.0
    return statistics.fmean(vals), sd


def _meta_lines(meta: dict, timestamp: str | None) -> list[str]:
    lines = []
    if timestamp is not None:
        lines.append(f"timestamp: {timestamp}")
    lines += [f"{k}: {v}" for k, v in meta.items()]
    return lines


def format_report(report: MetricsReport, method: str, meta: dict | None = None, timestamp: str | None = None) -> str:
    cm = report.cm
    lines = ["# bangla-toxic metrics report v1"]
    lines += _meta_lines({**report.meta, **(meta or {})}, timestamp)
    lines += [
        f"n: {cm.total}",
        f"tp: {cm.tp}", f"tn: {cm.tn}", f"fp: {cm.fp}", f"fn: {cm.fn}",
    ]
    flags = [n for n, on in (("precision", report.precision_degenerate), ("recall", report.recall_degenerate)) if on]
    if flags:
        lines.append("degenerate: " + ",".join(flags))
    lines += ["", TABLE_HEADER, report.row(method)]
    return "\n".join(lines) + "\n"


def format_cv_report(reports, method: str, meta: dict | None = None, timestamp: str | None = None) -> str:
    """Per-fold rows followed by ``Average Accuracy mean (± sd)``."""
    mean, sd = mean_sd(r.accuracy for r in reports)
    lines = ["# bangla-toxic cross-validation report v1"]
    lines += _meta_lines(meta or {}, timestamp)
    lines.append(f"k: {len(reports)}")
    for i, r in enumerate(reports, 1):
        cm = r.cm
        lines.append(f"fold {i}: n={cm.total} tp={cm.tp} tn={cm.tn} fp={cm.fp} fn={cm.fn}")
    lines += ["", TABLE_HEADER]
    for i, r in enumerate(reports):
        lines.append(r.row(method if i == 0 else f"fold {i + 1}"))
    lines.append(f"Average Accuracy\t\t\t{mean:.4f} (± {sd:.4f})")
    return "\n".join(lines) + "\n"


def check_vocab(params, vocab) -> None:
    """Raise if the model was trained against a different vocabulary."""
    if vocab is not None and params.vocab_hash and params.vocab_hash != vocab.hash():
        raise CompatibilityError(
            f"model trained against vocabulary {params.vocab_hash[:12]}..., got {vocab.hash()[:12]}..."
        )


def evaluate(
    params, x, y, vocab=None, threshold: float = 0.5, batch_size: int = 1024, threads: int = 1, **meta
) -> MetricsReport:
    """Score an encoded ``(N, T)`` grid against binary labels.

    With ``threads > 1`` the grid is sharded across a thread pool; shards are
    re-joined in order so the result does not depend on ``threads``.
    """
    from .network import predict_proba

    check_vocab(params, vocab)
    x = np.asarray(x)
    if len(x) == 0:
        raise ArgumentError("cannot evaluate on an empty dataset")
    if threads > 1 and len(x) > 1:
        shards = np.array_split(np.arange(len(x)), threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            probs = np.concatenate(list(pool.map(lambda idx: predict_proba(x[idx], params, batch_size), shards)))
    else:
        probs = predict_proba(x, params, batch_size)
    preds = (probs >= threshold).astype(np.int64)
    return MetricsReport.from_predictions(preds, y, **meta)
