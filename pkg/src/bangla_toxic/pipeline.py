"""Glue between labelled comments and model-ready integer grids."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .dataset import LabeledComment
from .text import preprocess
from .vocab import MAX_LEN, Vocabulary, build_vocabulary, encode


def tokens_of(comments: Sequence[LabeledComment]) -> list[list[str]]:
    return [preprocess(c.text) for c in comments]


def vocab_from(comments: Sequence[LabeledComment]) -> Vocabulary:
    return build_vocabulary(tokens_of(comments))


def encode_comments(comments: Sequence[LabeledComment], vocab: Vocabulary, max_len: int = MAX_LEN):
    """Return ``(grid, labels)``: an ``N x max_len`` int64 grid and int64 labels."""
    x = encode(tokens_of(comments), vocab, max_len)
    y = np.array([c.label for c in comments], dtype=np.int64)
    return x, y


def subset(comments: Sequence[LabeledComment], indices) -> list[LabeledComment]:
    return [comments[int(i)] for i in indices]
