"""Native n-gram overlap and readability metrics.

All overlap scores use the shared tokenizer (lowercase, no stemming) so
values are comparable run to run. When both sides of an overlap metric are
empty the score is 1.0 (identity); when only one side is empty it is 0.0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .textproc import EmptyText, ngrams, readability_stats

# Flesch reading ease and Dale-Chall constants, applied verbatim. The
# Dale-Chall variant here carries no constant adjustment term.
_FRE_BASE = 206.835
_FRE_ASL = 1.015
_FRE_ASW = 84.6
_DCR_PDW = 0.1579
_DCR_ASL = 0.0496


class NoReference(ValueError):
    """BLEU requires at least one reference."""


@dataclass(frozen=True)
class PrfScore:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_pr(cls, precision: float, recall: float) -> "PrfScore":
        if precision + recall == 0:
            return cls(precision, recall, 0.0)
        return cls(precision, recall, 2 * precision * recall / (precision + recall))

    @classmethod
    def perfect(cls) -> "PrfScore":
        return cls(1.0, 1.0, 1.0)

    @classmethod
    def zero(cls) -> "PrfScore":
        return cls(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class MetricReport:
    """Automatic metric scores for one (summary, reference) pair.

    A None field means the metric was skipped for this pair. Readability
    scores are computed on the candidate alone; `reference_kind` records
    what the overlap metrics were scored against.
    """

    candidate_id: str
    reference_id: str
    rouge1: PrfScore | None = None
    rouge2: PrfScore | None = None
    rougeL: PrfScore | None = None
    bleu: float | None = None
    bertscore: PrfScore | None = None
    summac: float | None = None
    fre: float | None = None
    dcr: float | None = None
    reference_kind: str = "source_document"


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int) -> PrfScore:
    """Clipped n-gram overlap precision/recall/F1 for n in {1, 2}."""
    if n not in (1, 2):
        raise ValueError(f"rouge_n supports n in {{1, 2}}, got {n}")
    cand = ngrams(candidate, n)
    ref = ngrams(reference, n)
    if not cand and not ref:
        return PrfScore.perfect()
    if not cand or not ref:
        return PrfScore.zero()
    overlap = sum((cand & ref).values())
    return PrfScore.from_pr(overlap / sum(cand.values()), overlap / sum(ref.values()))


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    # Classic DP over the shorter sequence to bound memory.
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> PrfScore:
    """Longest-common-subsequence precision/recall/F1."""
    cand = tuple(candidate)
    ref = tuple(reference)
    if not cand and not ref:
        return PrfScore.perfect()
    if not cand or not ref:
        return PrfScore.zero()
    lcs = _lcs_length(cand, ref)
    return PrfScore.from_pr(lcs / len(cand), lcs / len(ref))


def bleu(
    candidate: Sequence[str],
    references: Sequence[Sequence[str]],
    max_n: int = 4,
    smoothing: bool = False,
) -> float:
    """Geometric mean of clipped n-gram precisions with brevity penalty.

    Orders run from 1 to min(max_n, |candidate|); any zero precision makes
    the whole score 0 unless `smoothing` replaces zero counts with a small
    epsilon. No smoothing is the default on purpose: near-zero BLEU on
    dissimilar texts is a signal this toolkit must preserve, not paper over.
    """
    if not references:
        raise NoReference("bleu needs at least one reference")
    cand = tuple(candidate)
    refs = [tuple(r) for r in references]
    if not cand:
        return 0.0

    orders = range(1, min(max_n, len(cand)) + 1)
    log_sum = 0.0
    for n in orders:
        counts = ngrams(cand, n)
        max_ref: dict[tuple[str, ...], int] = {}
        for ref in refs:
            for gram, c in ngrams(ref, n).items():
                if c > max_ref.get(gram, 0):
                    max_ref[gram] = c
        clipped = sum(min(c, max_ref.get(gram, 0)) for gram, c in counts.items())
        total = sum(counts.values())
        if clipped == 0:
            if not smoothing:
                return 0.0
            p = 0.1 / total
        else:
            p = clipped / total
        log_sum += math.log(p)
    geo_mean = math.exp(log_sum / len(orders))

    c = len(cand)
    r = min((len(ref) for ref in refs), key=lambda rl: (abs(rl - c), rl))
    bp = 1.0 if c >= r else math.exp(1 - r / c)
    return bp * geo_mean


def fre(text: str) -> float:
    """Flesch reading ease over the shared sentence/syllable primitives."""
    stats = readability_stats(text)
    return _FRE_BASE - _FRE_ASL * stats.asl - _FRE_ASW * stats.asw


def dcr(text: str, familiar: frozenset[str] | set[str]) -> float:
    """Dale-Chall readability; tokens absent from `familiar` are difficult."""
    stats = readability_stats(text, familiar)
    return _DCR_PDW * (stats.pdw * 100) + _DCR_ASL * stats.asl


__all__ = [
    "EmptyText",
    "MetricReport",
    "NoReference",
    "PrfScore",
    "bleu",
    "dcr",
    "fre",
    "rouge_l",
    "rouge_n",
]
