"""Embedding-similarity and sentence-entailment metrics over providers.

Both metrics are provider-agnostic: swap the deterministic mocks for real
endpoints without touching the aggregation logic. Consistency uses the
zero-shot max-then-mean aggregation over the sentence entailment matrix;
reports carry an aggregation tag so that choice is never silent.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .lexmetrics import PrfScore
from .providers import Embedder, NliProvider
from .textproc import SentenceSeq, TokenSeq

logger = logging.getLogger(__name__)

ZERO_SHOT = "zero-shot"


class EmptyInput(ValueError):
    pass


class EmptySummary(EmptyInput):
    pass


class EmptyDocument(EmptyInput):
    pass


@dataclass(frozen=True)
class ConsistencyReport:
    score: float
    sentence_matrix: tuple[tuple[float, ...], ...]  # rows: summary sentences
    aggregation: str = ZERO_SHOT


def _cosine_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    an = a / np.maximum(np.linalg.norm(a, axis=1, keepdims=True), 1e-12)
    bn = b / np.maximum(np.linalg.norm(b, axis=1, keepdims=True), 1e-12)
    return an @ bn.T


def bertscore(candidate: TokenSeq, reference: TokenSeq, embedder: Embedder) -> PrfScore:
    """Greedy-matching similarity over provider embeddings.

    Recall is the mean over reference tokens of the best cosine match in
    the candidate; precision is symmetric. No idf weighting and no baseline
    rescaling, so mock-embedder oracles stay closed-form.
    """
    if not candidate:
        raise EmptyInput("candidate has no tokens")
    if not reference:
        raise EmptyInput("reference has no tokens")
    cand = embedder.embed(" ".join(candidate.tokens))
    ref = embedder.embed(" ".join(reference.tokens))
    sim = _cosine_matrix(cand.vectors, ref.vectors)  # candidate x reference
    precision = float(sim.max(axis=1).mean())
    recall = float(sim.max(axis=0).mean())
    return PrfScore.from_pr(precision, recall)


def _truncated(text: str, limit: int | None, role: str) -> str:
    if limit is not None and len(text) > limit:
        logger.warning("truncating %s sentence from %d to %d chars for NLI", role, len(text), limit)
        return text[:limit]
    return text


def summac_zs(summary: SentenceSeq, document: SentenceSeq, nli: NliProvider) -> ConsistencyReport:
    """Sentence-level consistency: entailment matrix, max per row, mean overall.

    matrix[i][j] holds entailment(document sentence j => summary sentence i).
    """
    if not len(summary):
        raise EmptySummary("summary has no sentences")
    if not len(document):
        raise EmptyDocument("document has no sentences")
    limit = nli.max_input_chars
    matrix: list[tuple[float, ...]] = []
    row_max: list[float] = []
    for hyp in summary.texts:
        hyp_t = _truncated(hyp, limit, "summary")
        row = tuple(
            nli.nli(_truncated(prem, limit, "document"), hyp_t).entailment
            for prem in document.texts
        )
        matrix.append(row)
        row_max.append(max(row))
    score = sum(row_max) / len(row_max)
    return ConsistencyReport(score=score, sentence_matrix=tuple(matrix), aggregation=ZERO_SHOT)
