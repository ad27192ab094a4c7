"""Shared fixtures plus a per-criterion summary for the acceptance suite."""

from __future__ import annotations

import json

import pytest

from sumlab.corpus import Corpus, Document

_acceptance_results: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _acceptance_results[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid in sorted(_acceptance_results):
        outcome = _acceptance_results[nodeid]
        label = "PASS" if outcome == "passed" else outcome.upper()
        terminalreporter.write_line(f"{label}  {nodeid.split('::')[-1]}")


def make_document(doc_id: str = "d1", abstract: str = "", claims: str = "") -> Document:
    return Document(
        id=doc_id,
        title=f"Title {doc_id}",
        abstract=abstract or f"An apparatus for {doc_id} that synchronizes data streams across devices.",
        claims=claims or f"1. A method for {doc_id} comprising receiving a stream. 2. The method further comprising decoding.",
    )


def make_corpus(n: int = 3) -> Corpus:
    return Corpus(tuple(make_document(f"d{i}") for i in range(1, n + 1)), source_uri="memory")


def write_corpus_file(path, docs):
    lines = [
        json.dumps({"id": d.id, "title": d.title, "abstract": d.abstract, "claims": d.claims})
        for d in docs
    ]
    path.write_text("\n".join(lines) + "\n", "utf-8")


@pytest.fixture
def small_corpus() -> Corpus:
    return make_corpus(3)
