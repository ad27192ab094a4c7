"""Append-only run persistence and report rendering.

A run is a directory of line-delimited JSON files (summaries, metrics,
ratings, transcripts) plus a manifest. Records are immutable once written;
appends are idempotent on the record's natural key, and a second append
with the same key but different content is an error. Desk-scale by design:
everything is diff-able text.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .judge import DIMENSIONS, SCALE_MAX, SCALE_MIN
from .lexmetrics import MetricReport, PrfScore
from .stats import ScoreVector, aggregate

MANIFEST_FILE = "manifest.json"
METRIC_ROW_ORDER = ("bleu", "rouge1", "rouge2", "rougeL", "bertscore", "summac", "fre", "dcr")
EVALUATOR_KINDS = ("human", "llm")
TABLE_KINDS = ("metrics", "judgments", "correlations")


class StoreError(RuntimeError):
    pass


class ValidationFailed(StoreError):
    pass


class DuplicateKey(StoreError):
    pass


class StorageFailure(StoreError):
    pass


class EmptyRun(StoreError):
    pass


class NoGoldChecks(StoreError):
    def __init__(self, session_id: str):
        super().__init__(f"session {session_id!r} has no gold-check records")
        self.session_id = session_id


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class SummaryRecord:
    document_id: str
    model_name: str
    text: str
    provenance: str = "ingested"  # generated | ingested
    round: int = 0
    created_at: str = field(default_factory=_utc_now)

    kind = "summary"

    def validate(self):
        if not self.document_id or not self.model_name:
            raise ValidationFailed("summary needs document_id and model_name")
        if self.provenance not in ("generated", "ingested"):
            raise ValidationFailed(f"bad provenance {self.provenance!r}")
        if self.round < 0:
            raise ValidationFailed("round must be >= 0")
        if not self.text:
            raise ValidationFailed("summary text is empty")

    def natural_key(self) -> tuple:
        return (self.document_id, self.model_name, self.round)

    def fingerprint_fields(self) -> dict:
        d = asdict(self)
        d.pop("created_at")
        return d


@dataclass(frozen=True)
class RatingRecord:
    document_id: str
    model_name: str
    evaluator_id: str
    evaluator_kind: str  # human | llm
    clarity: int
    accuracy: int
    coverage: int
    overall: int
    rationale: str = ""
    session_id: str | None = None
    is_gold_check: bool = False
    passed_gold: bool | None = None

    kind = "rating"

    def validate(self):
        if self.evaluator_kind not in EVALUATOR_KINDS:
            raise ValidationFailed(f"bad evaluator_kind {self.evaluator_kind!r}")
        for name in DIMENSIONS:
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or not (SCALE_MIN <= value <= SCALE_MAX):
                raise ValidationFailed(f"{name} score {value!r} outside {SCALE_MIN}..{SCALE_MAX}")
        if self.evaluator_kind == "human" and not self.session_id:
            raise ValidationFailed("human ratings must carry a rater session id")
        if self.is_gold_check and self.passed_gold is None:
            raise ValidationFailed("gold-check ratings must record passed_gold")

    def natural_key(self) -> tuple:
        return (self.document_id, self.model_name, self.evaluator_id, self.session_id or "", self.is_gold_check)

    def fingerprint_fields(self) -> dict:
        return asdict(self)

    def scores(self) -> dict[str, int]:
        return {name: getattr(self, name) for name in DIMENSIONS}


@dataclass(frozen=True)
class MetricRecord:
    document_id: str
    model_name: str
    report: MetricReport

    kind = "metric"

    def validate(self):
        if not self.document_id or not self.model_name:
            raise ValidationFailed("metric record needs document_id and model_name")

    def natural_key(self) -> tuple:
        return (self.document_id, self.model_name)

    def fingerprint_fields(self) -> dict:
        return {"document_id": self.document_id, "model_name": self.model_name, "report": _report_to_dict(self.report)}


@dataclass(frozen=True)
class TranscriptRecord:
    document_id: str
    model_name: str
    payload: dict  # serialized refinement transcript

    kind = "transcript"

    def validate(self):
        if not self.payload.get("rounds"):
            raise ValidationFailed("transcript has no rounds")

    def natural_key(self) -> tuple:
        return (self.document_id, self.model_name)

    def fingerprint_fields(self) -> dict:
        return asdict(self)


Record = SummaryRecord | RatingRecord | MetricRecord | TranscriptRecord

_FILES = {
    "summary": "summaries.jsonl",
    "rating": "ratings.jsonl",
    "metric": "metrics.jsonl",
    "transcript": "transcripts.jsonl",
}

_SECRET_MARKERS = ("key", "secret", "token", "password", "credential")


def redact_config(config: dict) -> dict:
    """Deep-copy a config dict with credential-looking values masked."""
    out = {}
    for k, v in config.items():
        if isinstance(v, dict):
            out[k] = redact_config(v)
        elif any(marker in k.lower() for marker in _SECRET_MARKERS) and isinstance(v, str) and "env" not in k.lower():
            out[k] = "***"
        else:
            out[k] = v
    return out


@dataclass(frozen=True)
class RunManifest:
    run_id: str
    corpus_sha256: str
    sample_size: int | None
    seed: int
    models: tuple[str, ...]  # roster order drives report column order
    provider_configs: dict = field(default_factory=dict)
    versions: dict = field(default_factory=lambda: {"sumlab": __version__})
    created_at: str = field(default_factory=_utc_now)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["models"] = list(self.models)
        d["provider_configs"] = redact_config(self.provider_configs)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(
            run_id=d["run_id"],
            corpus_sha256=d["corpus_sha256"],
            sample_size=d.get("sample_size"),
            seed=d["seed"],
            models=tuple(d.get("models", ())),
            provider_configs=d.get("provider_configs", {}),
            versions=d.get("versions", {}),
            created_at=d.get("created_at", _utc_now()),
        )


def _prf_to_dict(score: PrfScore | None) -> dict | None:
    if score is None:
        return None
    return {"precision": score.precision, "recall": score.recall, "f1": score.f1}


def _prf_from_dict(d: dict | None) -> PrfScore | None:
    if d is None:
        return None
    return PrfScore(d["precision"], d["recall"], d["f1"])


def _report_to_dict(report: MetricReport) -> dict:
    return {
        "candidate_id": report.candidate_id,
        "reference_id": report.reference_id,
        "rouge1": _prf_to_dict(report.rouge1),
        "rouge2": _prf_to_dict(report.rouge2),
        "rougeL": _prf_to_dict(report.rougeL),
        "bleu": report.bleu,
        "bertscore": _prf_to_dict(report.bertscore),
        "summac": report.summac,
        "fre": report.fre,
        "dcr": report.dcr,
        "reference_kind": report.reference_kind,
    }


def _report_from_dict(d: dict) -> MetricReport:
    return MetricReport(
        candidate_id=d["candidate_id"],
        reference_id=d["reference_id"],
        rouge1=_prf_from_dict(d.get("rouge1")),
        rouge2=_prf_from_dict(d.get("rouge2")),
        rougeL=_prf_from_dict(d.get("rougeL")),
        bleu=d.get("bleu"),
        bertscore=_prf_from_dict(d.get("bertscore")),
        summac=d.get("summac"),
        fre=d.get("fre"),
        dcr=d.get("dcr"),
        reference_kind=d.get("reference_kind", "source_document"),
    )


def _record_to_dict(record: Record) -> dict:
    if isinstance(record, MetricRecord):
        body = record.fingerprint_fields()
    else:
        body = asdict(record)
    return body


def _record_from_dict(kind: str, body: dict) -> Record:
    if kind == "summary":
        return SummaryRecord(**body)
    if kind == "rating":
        return RatingRecord(**body)
    if kind == "metric":
        return MetricRecord(document_id=body["document_id"], model_name=body["model_name"], report=_report_from_dict(body["report"]))
    if kind == "transcript":
        return TranscriptRecord(**body)
    raise StorageFailure(f"unknown record kind {kind!r}")


class RunStore:
    """Single-writer, many-reader store over one run directory."""

    def __init__(self, run_dir: str | Path, manifest: RunManifest):
        self.run_dir = Path(run_dir)
        self.manifest = manifest
        self._lock = threading.Lock()
        self._index: dict[tuple, tuple[str, str]] = {}  # (kind, *key) -> (record_id, fingerprint)
        self._records: dict[str, list[Record]] = {kind: [] for kind in _FILES}

    # -- lifecycle ---------------------------------------------------------

    @classmethod
    def create(cls, run_dir: str | Path, manifest: RunManifest) -> "RunStore":
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        manifest_path = run_dir / MANIFEST_FILE
        if manifest_path.exists():
            existing = RunManifest.from_dict(json.loads(manifest_path.read_text("utf-8")))
            if existing.run_id != manifest.run_id:
                raise StorageFailure(
                    f"run directory {run_dir} already holds run {existing.run_id!r}, not {manifest.run_id!r}"
                )
            return cls.open(run_dir)
        manifest_path.write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n", "utf-8")
        store = cls(run_dir, manifest)
        store._load()
        return store

    @classmethod
    def open(cls, run_dir: str | Path) -> "RunStore":
        run_dir = Path(run_dir)
        manifest_path = run_dir / MANIFEST_FILE
        if not manifest_path.exists():
            raise StorageFailure(f"no manifest in {run_dir}")
        manifest = RunManifest.from_dict(json.loads(manifest_path.read_text("utf-8")))
        store = cls(run_dir, manifest)
        store._load()
        return store

    def _load(self):
        for kind, filename in _FILES.items():
            path = self.run_dir / filename
            if not path.exists():
                continue
            with path.open("r", encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    row = json.loads(line)
                    record = _record_from_dict(kind, row["record"])
                    self._records[kind].append(record)
                    self._index[(kind, *record.natural_key())] = (row["record_id"], self._fingerprint(record))

    # -- writes ------------------------------------------------------------

    @staticmethod
    def _fingerprint(record: Record) -> str:
        payload = json.dumps(record.fingerprint_fields(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def _record_id(self, record: Record) -> str:
        key = json.dumps([self.manifest.run_id, record.kind, list(map(str, record.natural_key()))])
        return f"{record.kind}-{hashlib.sha256(key.encode('utf-8')).hexdigest()[:12]}"

    def append(self, record: Record) -> str:
        """Validate and persist; identical re-appends return the existing id."""
        record.validate()
        key = (record.kind, *record.natural_key())
        fingerprint = self._fingerprint(record)
        with self._lock:
            if key in self._index:
                existing_id, existing_fp = self._index[key]
                if existing_fp == fingerprint:
                    return existing_id
                raise DuplicateKey(f"{record.kind} record {record.natural_key()} already stored with different content")
            record_id = self._record_id(record)
            row = {"record_id": record_id, "run_id": self.manifest.run_id, "record": _record_to_dict(record)}
            path = self.run_dir / _FILES[record.kind]
            try:
                with path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")
            except OSError as exc:
                raise StorageFailure(f"cannot append to {path}: {exc}") from exc
            self._records[record.kind].append(record)
            self._index[key] = (record_id, fingerprint)
            return record_id

    # -- reads -------------------------------------------------------------

    def has(self, kind: str, *natural_key) -> bool:
        return (kind, *natural_key) in self._index

    def summaries(self) -> list[SummaryRecord]:
        return list(self._records["summary"])

    def ratings(self) -> list[RatingRecord]:
        return list(self._records["rating"])

    def metrics(self) -> list[MetricRecord]:
        return list(self._records["metric"])

    def transcripts(self) -> list[TranscriptRecord]:
        return list(self._records["transcript"])

    def model_order(self, seen: Iterable[str]) -> list[str]:
        """Roster order from the manifest, then first-seen for stragglers."""
        ordered = [m for m in self.manifest.models if m in set(seen)]
        for name in seen:
            if name not in ordered:
                ordered.append(name)
        return ordered


def filter_reliable(ratings: Sequence[RatingRecord], gold_threshold: float) -> list[RatingRecord]:
    """Drop every record of human sessions whose gold pass rate is below threshold.

    LLM records pass through untouched. A human session with no gold checks
    cannot be vetted and is an error.
    """
    sessions: dict[str, list[RatingRecord]] = {}
    for r in ratings:
        if r.evaluator_kind == "human":
            sessions.setdefault(r.session_id or "", []).append(r)

    reliable: set[str] = set()
    for session_id, records in sessions.items():
        golds = [r for r in records if r.is_gold_check]
        if not golds:
            raise NoGoldChecks(session_id)
        pass_rate = sum(1 for g in golds if g.passed_gold) / len(golds)
        if pass_rate >= gold_threshold:
            reliable.add(session_id)

    return [r for r in ratings if r.evaluator_kind != "human" or (r.session_id or "") in reliable]


# -- score vectors and report tables ----------------------------------------


def _metric_value(report: MetricReport, name: str) -> float | None:
    value = getattr(report, name)
    if isinstance(value, PrfScore):
        return value.f1
    return value


def build_score_vectors(
    store: RunStore,
    level: str = "model",
    gold_threshold: float | None = None,
) -> list[ScoreVector]:
    """Judgment and metric score vectors at model or sample granularity.

    Judgment values pool raters per (kind, document, model) sample; the
    model level then averages samples per model. Gold-check ratings never
    enter vectors; with a threshold set, unreliable sessions are dropped
    first via filter_reliable.
    """
    if level not in ("model", "sample"):
        raise ValueError(f"level must be 'model' or 'sample', got {level!r}")
    ratings = store.ratings()
    if gold_threshold is not None:
        ratings = filter_reliable(ratings, gold_threshold)
    ratings = [r for r in ratings if not r.is_gold_check]

    vectors: list[ScoreVector] = []

    # judgments: label = f"{evaluator_kind}_{dimension}"
    per_sample: dict[tuple[str, str], dict[tuple[str, str], list[int]]] = {}
    for r in ratings:
        for dim in DIMENSIONS:
            per_sample.setdefault((r.evaluator_kind, dim), {}).setdefault((r.document_id, r.model_name), []).append(
                getattr(r, dim)
            )
    for kind in EVALUATOR_KINDS:
        for dim in DIMENSIONS:
            samples = per_sample.get((kind, dim))
            if not samples:
                continue
            vectors.append(_vector_from_samples(store, f"{kind}_{dim}", {k: _mean(v) for k, v in samples.items()}, level))

    # metrics: one vector per metric with any data
    metric_samples: dict[str, dict[tuple[str, str], float]] = {}
    for m in store.metrics():
        for name in METRIC_ROW_ORDER:
            value = _metric_value(m.report, name)
            if value is not None:
                metric_samples.setdefault(name, {})[(m.document_id, m.model_name)] = value
    for name in METRIC_ROW_ORDER:
        if name in metric_samples:
            vectors.append(_vector_from_samples(store, name, metric_samples[name], level))

    return vectors


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


def _vector_from_samples(
    store: RunStore, label: str, samples: dict[tuple[str, str], float], level: str
) -> ScoreVector:
    if level == "sample":
        keys = sorted(samples)
        return ScoreVector(label, tuple(samples[k] for k in keys), tuple(f"{d}:{m}" for d, m in keys))
    by_model: dict[str, list[float]] = {}
    for (_, model), value in samples.items():
        by_model.setdefault(model, []).append(value)
    models = store.model_order(by_model)
    return ScoreVector(label, tuple(_mean(by_model[m]) for m in models), tuple(models))


def _format_grid(row_labels: Sequence[str], col_labels: Sequence[str], cells: dict[tuple[str, str], str]) -> str:
    head = max([len(r) for r in row_labels] + [0])
    widths = [max(len(c), max((len(cells.get((r, c), "")) for r in row_labels), default=0)) for c in col_labels]
    lines = [" " * head + "  " + "  ".join(c.ljust(widths[j]) for j, c in enumerate(col_labels))]
    for r in row_labels:
        lines.append(r.ljust(head) + "  " + "  ".join(cells.get((r, c), "-").ljust(widths[j]) for j, c in enumerate(col_labels)))
    return "\n".join(lines) + "\n"


def _grid_csv(row_labels: Sequence[str], col_labels: Sequence[str], cells: dict[tuple[str, str], str]) -> str:
    lines = ["," + ",".join(col_labels)]
    for r in row_labels:
        lines.append(r + "," + ",".join(cells.get((r, c), "") for c in col_labels))
    return "\n".join(lines) + "\n"


def render_table(store: RunStore, table_kind: str, precision: int = 2) -> tuple[str, str]:
    """Render a run's records as (aligned_text, csv).

    metrics: metric rows x model columns, mean(std) over samples.
    judgments: kind_dimension rows x model columns, mean(std) over samples
    (raters pooled per sample first).
    correlations: model-level Kendall tau-b matrix over all score vectors.
    """
    if table_kind not in TABLE_KINDS:
        raise ValueError(f"table_kind must be one of {TABLE_KINDS}, got {table_kind!r}")

    if table_kind == "correlations":
        from .stats import correlation_matrix

        vectors = [v for v in build_score_vectors(store, level="model") if len(v) >= 3]
        if len(vectors) < 2:
            raise EmptyRun("not enough score vectors to correlate")
        matrix = correlation_matrix(vectors, method="kendall")
        return matrix.to_text(), matrix.to_csv()

    cells: dict[tuple[str, str], str] = {}
    models_seen: list[str] = []
    row_labels: list[str] = []

    if table_kind == "metrics":
        samples: dict[str, dict[str, list[float]]] = {}
        for m in store.metrics():
            if m.model_name not in models_seen:
                models_seen.append(m.model_name)
            for name in METRIC_ROW_ORDER:
                value = _metric_value(m.report, name)
                if value is not None:
                    samples.setdefault(name, {}).setdefault(m.model_name, []).append(value)
        if not samples:
            raise EmptyRun("run has no metric records")
        row_labels = [name for name in METRIC_ROW_ORDER if name in samples]
        columns = store.model_order(models_seen)
        for name in row_labels:
            for model, values in samples[name].items():
                cells[(name, model)] = aggregate(values, precision).render()
    else:
        ratings = [r for r in store.ratings() if not r.is_gold_check]
        if not ratings:
            raise EmptyRun("run has no rating records")
        pooled: dict[tuple[str, str], dict[tuple[str, str], list[int]]] = {}
        for r in ratings:
            if r.model_name not in models_seen:
                models_seen.append(r.model_name)
            for dim in DIMENSIONS:
                pooled.setdefault((r.evaluator_kind, dim), {}).setdefault((r.document_id, r.model_name), []).append(
                    getattr(r, dim)
                )
        columns = store.model_order(models_seen)
        for kind in EVALUATOR_KINDS:
            for dim in DIMENSIONS:
                key = (kind, dim)
                if key not in pooled:
                    continue
                label = f"{kind}_{dim}"
                row_labels.append(label)
                by_model: dict[str, list[float]] = {}
                for (doc, model), scores in pooled[key].items():
                    by_model.setdefault(model, []).append(_mean(scores))
                for model, values in by_model.items():
                    cells[(label, model)] = aggregate(values, precision).render()

    return _format_grid(row_labels, columns, cells), _grid_csv(row_labels, columns, cells)
