"""Deterministic text primitives shared by the metric implementations.

Tokenization is lowercase alphanumeric with punctuation stripped and no
stemming; sentence splitting is terminal-punctuation based and deliberately
abbreviation-blind. Both choices trade linguistic finesse for run-to-run
reproducibility.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterator, Sequence


class EmptyText(ValueError):
    """Raised when an operation needs at least one word token."""


_WORD = re.compile(r"[A-Za-z0-9]+")
# Terminal punctuation run followed by whitespace or end of text.
_SENT_BOUNDARY = re.compile(r"[.!?]+(?:\s+|$)")
_VOWELS = frozenset("aeiouy")


@dataclass(frozen=True)
class TokenSeq:
    """Lowercased word tokens plus their character spans in the source text."""

    tokens: tuple[str, ...]
    spans: tuple[tuple[int, int], ...] = field(default=())

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[str]:
        return iter(self.tokens)

    def __getitem__(self, i):
        return self.tokens[i]

    def __bool__(self) -> bool:
        return bool(self.tokens)


@dataclass(frozen=True)
class SentenceSeq:
    """Ordered sentences; `texts` holds the raw sentence strings, aligned."""

    sentences: tuple[TokenSeq, ...]
    texts: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self) -> Iterator[TokenSeq]:
        return iter(self.sentences)


@dataclass(frozen=True)
class ReadabilityStats:
    asl: float  # average sentence length, words per sentence
    asw: float  # average syllables per word
    pdw: float  # proportion of difficult words, in [0, 1]


def tokenize(text: str) -> TokenSeq:
    """Split text into lowercase alphanumeric tokens with source spans."""
    tokens: list[str] = []
    spans: list[tuple[int, int]] = []
    for m in _WORD.finditer(text):
        tokens.append(m.group().lower())
        spans.append((m.start(), m.end()))
    return TokenSeq(tuple(tokens), tuple(spans))


def split_sentences(text: str) -> SentenceSeq:
    """Split on ./!/? followed by whitespace or end; drop word-less pieces.

    Abbreviation-blind by design: "Mr. Smith" yields two sentences. Every
    word token of the input lands in exactly one sentence.
    """
    pieces: list[str] = []
    start = 0
    for m in _SENT_BOUNDARY.finditer(text):
        pieces.append(text[start : m.end()])
        start = m.end()
    if start < len(text):
        pieces.append(text[start:])

    sentences: list[TokenSeq] = []
    texts: list[str] = []
    for piece in pieces:
        seq = tokenize(piece)
        if seq:
            sentences.append(seq)
            texts.append(piece.strip())
    return SentenceSeq(tuple(sentences), tuple(texts))


def count_syllables(word: str) -> int:
    """Estimate syllables by vowel-group counting with silent-e suppression.

    A trailing 'e' is dropped unless it closes a consonant+"le" ending
    ("readable" keeps its final group). Result is clamped to at least 1.
    """
    if not word:
        raise EmptyText("cannot count syllables of an empty token")
    w = word.lower()
    if w.endswith("e") and not (len(w) >= 3 and w[-2] == "l" and w[-3] not in _VOWELS):
        w = w[:-1]
    groups = 0
    in_group = False
    for ch in w:
        if ch in _VOWELS:
            if not in_group:
                groups += 1
            in_group = True
        else:
            in_group = False
    return max(1, groups)


def ngrams(seq: Sequence[str], n: int) -> Counter[tuple[str, ...]]:
    """All contiguous n-token windows with multiplicity; empty when |seq| < n."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    toks = tuple(seq)
    return Counter(toks[i : i + n] for i in range(len(toks) - n + 1))


def readability_stats(text: str, familiar: frozenset[str] | set[str] = frozenset()) -> ReadabilityStats:
    """Sentence length, syllable, and difficult-word statistics for a text.

    A token is "difficult" iff it is absent from `familiar`; with an empty
    set every word counts as difficult.
    """
    sentences = split_sentences(text)
    words = [tok for sent in sentences for tok in sent]
    if not words:
        raise EmptyText("text contains no word tokens")
    asl = len(words) / len(sentences)
    asw = sum(count_syllables(w) for w in words) / len(words)
    pdw = sum(1 for w in words if w not in familiar) / len(words)
    return ReadabilityStats(asl=asl, asw=asw, pdw=pdw)


def load_familiar_words(path: str | Path | None = None) -> frozenset[str]:
    """Load the familiar-word list: one lowercase word per line, '#' comments.

    With no path, returns the bundled common-word list. The bundled list is a
    curated approximation of a basic English vocabulary, not a claim of
    fidelity to any published readability word list.
    """
    if path is None:
        data = resources.files("sumlab.assets").joinpath("familiar_words.txt").read_text("utf-8")
    else:
        data = Path(path).read_text("utf-8")
    words = set()
    for line in data.splitlines():
        word = line.strip().lower()
        if word and not word.startswith("#"):
            words.add(word)
    return frozenset(words)
