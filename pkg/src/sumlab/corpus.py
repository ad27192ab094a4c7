"""Document corpus loading, validation, and seeded sampling.

Corpora are UTF-8 line-delimited JSON: one object per line with string
fields id/title/abstract/claims. Loading is all-or-nothing; the first bad
record aborts with its line number.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from . import textproc

REQUIRED_FIELDS = ("id", "title", "abstract", "claims")
DEFAULT_JOINER = "\n\n"


class CorpusError(ValueError):
    """Base for corpus load/sample failures."""


class MalformedRecord(CorpusError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class MissingField(MalformedRecord):
    def __init__(self, line: int, field_name: str):
        super().__init__(line, f"missing field {field_name!r}")
        self.field_name = field_name


class EmptyText(MalformedRecord):
    def __init__(self, line: int, field_name: str):
        super().__init__(line, f"field {field_name!r} has no word tokens")
        self.field_name = field_name


class DuplicateId(CorpusError):
    def __init__(self, doc_id: str, line: int):
        super().__init__(f"line {line}: duplicate document id {doc_id!r}")
        self.doc_id = doc_id
        self.line = line


class SampleTooLarge(CorpusError):
    pass


@dataclass(frozen=True)
class Document:
    """One source text to be summarized and judged against."""

    id: str
    title: str
    abstract: str
    claims: str

    def text(self, joiner: str = DEFAULT_JOINER) -> str:
        """Abstract and claims joined into the summarization input."""
        return self.abstract + joiner + self.claims

    def word_count(self) -> int:
        """Whitespace-split word count over abstract+claims (histogram unit)."""
        return len(self.text(" ").split())


@dataclass(frozen=True)
class SampleSpec:
    size: int
    seed: int

    def __post_init__(self):
        if self.size <= 0:
            raise ValueError(f"sample size must be positive, got {self.size}")


@dataclass(frozen=True)
class Corpus:
    """Immutable, duplicate-free, order-stable collection of documents."""

    documents: tuple[Document, ...]
    source_uri: str = ""
    _by_id: dict[str, Document] = field(default=None, repr=False, compare=False)  # type: ignore[assignment]

    def __post_init__(self):
        index: dict[str, Document] = {}
        for doc in self.documents:
            if doc.id in index:
                raise CorpusError(f"duplicate document id {doc.id!r}")
            index[doc.id] = doc
        object.__setattr__(self, "_by_id", index)

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def get(self, doc_id: str) -> Document:
        return self._by_id[doc_id]

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._by_id

    def ids(self) -> tuple[str, ...]:
        return tuple(d.id for d in self.documents)


def _parse_record(line_no: int, raw: str) -> Document:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(line_no, f"invalid JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise MalformedRecord(line_no, "record is not an object")
    for name in REQUIRED_FIELDS:
        if name not in obj:
            raise MissingField(line_no, name)
        if not isinstance(obj[name], str):
            raise MalformedRecord(line_no, f"field {name!r} is not a string")
    for name in ("abstract", "claims"):
        if not textproc.tokenize(obj[name]):
            raise EmptyText(line_no, name)
    return Document(id=obj["id"], title=obj["title"], abstract=obj["abstract"], claims=obj["claims"])


def load_corpus(path: str | Path) -> Corpus:
    """Load and validate a line-delimited corpus file, preserving order."""
    path = Path(path)
    documents: list[Document] = []
    seen: dict[str, int] = {}
    with path.open("r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            doc = _parse_record(line_no, raw)
            if doc.id in seen:
                raise DuplicateId(doc.id, line_no)
            seen[doc.id] = line_no
            documents.append(doc)
    return Corpus(tuple(documents), source_uri=str(path))


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus back out in load_corpus format (round-trip identity)."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for doc in corpus:
            fh.write(json.dumps({"id": doc.id, "title": doc.title, "abstract": doc.abstract, "claims": doc.claims}, ensure_ascii=False))
            fh.write("\n")


def sample(corpus: Corpus, spec: SampleSpec) -> Corpus:
    """Draw spec.size documents without replacement, deterministically.

    Uses a PCG64 generator so the same (corpus, seed, size) triple yields
    the same sub-corpus on any platform.
    """
    if spec.size > len(corpus):
        raise SampleTooLarge(f"sample size {spec.size} exceeds corpus size {len(corpus)}")
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    picks = rng.choice(len(corpus), size=spec.size, replace=False)
    docs = tuple(corpus.documents[i] for i in picks)
    return Corpus(docs, source_uri=f"{corpus.source_uri}#sample(size={spec.size},seed={spec.seed})")


def length_histogram(corpus: Corpus, bin_width: int) -> list[tuple[int, int]]:
    """Word-count histogram as (bin_start, count), contiguous from zero."""
    if bin_width <= 0:
        raise ValueError(f"bin_width must be positive, got {bin_width}")
    if not len(corpus):
        return []
    counts = [doc.word_count() for doc in corpus]
    n_bins = max(counts) // bin_width + 1
    bins = [0] * n_bins
    for c in counts:
        bins[c // bin_width] += 1
    return [(i * bin_width, bins[i]) for i in range(n_bins)]
