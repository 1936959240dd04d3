"""Vocabulary construction, integer sequencing and left padding."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import FormatError

PAD = 0
OOV = 1
MAX_LEN = 80
VOCAB_FORMAT = "bangla-toxic-vocab"
VOCAB_VERSION = 1


@dataclass(frozen=True)
class Vocabulary:
    index_to_word: tuple[str, ...] = ()
    word_to_index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not self.word_to_index:
            mapping = {w: i + 2 for i, w in enumerate(self.index_to_word)}
            if len(mapping) != len(self.index_to_word):
                raise ValueError("duplicate words in vocabulary")
            object.__setattr__(self, "word_to_index", mapping)

    @property
    def size(self) -> int:
        """Number of real words (reserved pad/OOV excluded)."""
        return len(self.index_to_word)

    def __len__(self) -> int:
        return self.size

    def word(self, index: int) -> str | None:
        if index < 2 or index >= self.size + 2:
            return None
        return self.index_to_word[index - 2]

    def to_text(self) -> str:
        lines = [f"# {VOCAB_FORMAT} v{VOCAB_VERSION} size={self.size}"]
        lines.extend(self.index_to_word)
        return "\n".join(lines) + "\n"

    def hash(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_text().encode("utf-8"))

    @classmethod
    def load(cls, path) -> "Vocabulary":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def from_text(cls, text: str) -> "Vocabulary":
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if not lines:
            raise FormatError("empty vocabulary file")
        header = lines[0].split()
        if len(header) != 4 or header[0] != "#" or header[1] != VOCAB_FORMAT:
            raise FormatError(f"bad vocabulary header: {lines[0]!r}")
        version = header[2]
        if version != f"v{VOCAB_VERSION}":
            raise FormatError(f"vocabulary version {version} unsupported (expected v{VOCAB_VERSION})")
        try:
            size = int(header[3].removeprefix("size="))
        except ValueError:
            raise FormatError(f"bad size field {header[3]!r}") from None
        words = tuple(lines[1:])
        if len(words) != size:
            raise FormatError(f"header says {size} words, file has {len(words)}")
        try:
            return cls(words)
        except ValueError as e:
            raise FormatError(str(e)) from None


def build_vocabulary(corpus: Iterable[Sequence[str]]) -> Vocabulary:
    """Assign indices 2, 3, ... to tokens in first-occurrence order."""
    seen: dict[str, int] = {}
    for tokens in corpus:
        for tok in tokens:
            if tok not in seen:
                seen[tok] = len(seen) + 2
    return Vocabulary(tuple(seen))


def sequence(tokens: Sequence[str], vocab: Vocabulary) -> list[int]:
    lookup = vocab.word_to_index
    return [lookup.get(t, OOV) for t in tokens]


@dataclass(frozen=True)
class PaddedSequence:
    indices: np.ndarray
    original_length: int


def pad(indices: Sequence[int], max_len: int = MAX_LEN) -> PaddedSequence:
    """Left-pad with zeros; over-long input keeps its last ``max_len`` entries."""
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    arr = np.asarray(indices, dtype=np.int64).reshape(-1)
    out = np.zeros(max_len, dtype=np.int64)
    kept = arr[-max_len:] if arr.size else arr
    if kept.size:
        out[max_len - kept.size :] = kept
    return PaddedSequence(out, int(arr.size))


def encode(token_lists: Iterable[Sequence[str]], vocab: Vocabulary, max_len: int = MAX_LEN) -> np.ndarray:
    """Stack padded sequences into an ``N x max_len`` int64 grid."""
    rows = [pad(sequence(toks, vocab), max_len).indices for toks in token_lists]
    if not rows:
        return np.zeros((0, max_len), dtype=np.int64)
    return np.stack(rows)
