"""Cleaning, tokenisation and rule-based stemming of Bangla comments."""

from __future__ import annotations

import string
import unicodedata
from functools import lru_cache
from importlib import resources
from pathlib import Path

EMOJI_RANGES = (
    (0x1F300, 0x1F5FF),
    (0x1F600, 0x1F64F),
    (0x1F680, 0x1F6FF),
    (0x1F900, 0x1F9FF),
    (0x2600, 0x26FF),
    (0x2700, 0x27BF),
    (0xFE0E, 0xFE0F),
    (0x1F3FB, 0x1F3FF),
)
ZWJ = "\u200d"
DANDA = "\u0964"
DOUBLE_DANDA = "\u0965"

_ASCII_PUNCT = frozenset(string.punctuation)


def is_emoji(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in EMOJI_RANGES)


def _is_punct(ch: str) -> bool:
    return ch in _ASCII_PUNCT or ch in (DANDA, DOUBLE_DANDA) or unicodedata.category(ch).startswith("P")


def clean_text(raw: str) -> str:
    """Drop emoji, the ZWJs gluing them, and normalise whitespace.

    A ZWJ is dropped only when the nearest non-ZWJ character on either side
    is an emoji; ZWJ/ZWNJ inside Bangla conjuncts survive.
    """
    chars = list(raw)
    n = len(chars)
    emoji = [is_emoji(c) for c in chars]
    keep = [not e for e in emoji]
    i = 0
    while i < n:
        if chars[i] != ZWJ:
            i += 1
            continue
        j = i
        while j < n and chars[j] == ZWJ:
            j += 1
        left = emoji[i - 1] if i > 0 else False
        right = emoji[j] if j < n else False
        if left or right:
            for k in range(i, j):
                keep[k] = False
        i = j
    kept = "".join(c for c, k in zip(chars, keep) if k)
    return " ".join(kept.split())


def _strip_punct(piece: str) -> str:
    start, end = 0, len(piece)
    while start < end and _is_punct(piece[start]):
        start += 1
    while end > start and _is_punct(piece[end - 1]):
        end -= 1
    return piece[start:end]


def tokenize(text: str) -> list[str]:
    """Whitespace split, then strip surrounding punctuation (incl. dandas).

    Latin letters are lowercased; Bangla has no case. Input is re-cleaned,
    which is a no-op for already-cleaned text.
    """
    tokens = []
    for piece in clean_text(text).split():
        tok = _strip_punct(piece)
        if tok:
            tokens.append(tok.lower())
    return tokens


def _letter_count(s: str) -> int:
    return sum(1 for ch in s if unicodedata.category(ch).startswith("L"))


def _variants(affix: str) -> set[str]:
    # Tables are matched in every normal form a comment may arrive in.
    forms = {affix, unicodedata.normalize("NFC", affix), unicodedata.normalize("NFD", affix)}
    forms |= {f.replace("\u09af\u09bc", "\u09df") for f in list(forms)}
    return {f for f in forms if f}


def load_affix_table(path) -> tuple[str, ...]:
    """Read a one-affix-per-line table; ``#`` starts a comment.

    Returns the affixes (with normal-form variants) sorted longest first.
    """
    text = Path(path).read_text(encoding="utf-8")
    affixes: set[str] = set()
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            affixes |= _variants(line)
    return tuple(sorted(affixes, key=lambda a: (-len(a), a)))


@lru_cache(maxsize=None)
def default_suffixes() -> tuple[str, ...]:
    with resources.as_file(resources.files(__package__) / "data" / "suffixes.txt") as p:
        return load_affix_table(p)


@lru_cache(maxsize=None)
def default_prefixes() -> tuple[str, ...]:
    with resources.as_file(resources.files(__package__) / "data" / "prefixes.txt") as p:
        return load_affix_table(p)


def stem(token: str, suffixes=None, prefixes=None, min_letters: int = 2) -> str:
    """Strip at most one prefix and one suffix, longest match first.

    An affix is removed only if what remains still has ``min_letters``
    Unicode letters; otherwise the next shorter candidate is tried.
    """
    suffixes = default_suffixes() if suffixes is None else suffixes
    prefixes = default_prefixes() if prefixes is None else prefixes
    word = token
    for p in prefixes:
        if word.startswith(p) and _letter_count(word[len(p):]) >= min_letters:
            word = word[len(p):]
            break
    for s in suffixes:
        if word.endswith(s) and _letter_count(word[: -len(s)]) >= min_letters:
            word = word[: -len(s)]
            break
    return word


def preprocess(raw: str) -> list[str]:
    """clean -> tokenize -> stem, the full per-comment text pipeline."""
    return [stem(t) for t in tokenize(raw)]
