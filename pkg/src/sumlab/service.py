"""HTTP surface for the annotation client.

Serves rating tasks (documents plus summaries plus the shared rater
instructions), accepts Likert submissions, and exposes run reports. Gold
check tasks are interleaved per session at a configured rate; their gold
status and answer keys never leave the server. Ratings land in the run
store in exactly the shape CSV ingestion produces, so the analysis
pipeline never depends on this layer.
"""

from __future__ import annotations

import hashlib
import json
import random
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .corpus import Corpus
from .judge import DIMENSIONS, SCALE_MAX, SCALE_MIN, instruction_text
from .runstore import DuplicateKey, EmptyRun, RatingRecord, RunStore, render_table

SCALE_ANCHORS = {1: "Poor", 2: "Weak", 3: "Fair", 4: "Good", 5: "Excellent"}


@dataclass(frozen=True)
class GoldKey:
    """Operator-authored answer key for one gold-check task."""

    task_id: str
    document_id: str
    model_name: str
    summary_text: str
    expected: dict[str, int]
    tolerance: int = 1

    def passes(self, scores: dict[str, int]) -> bool:
        return all(abs(scores[d] - self.expected[d]) <= self.tolerance for d in DIMENSIONS)


def load_gold_keys(path: str | Path) -> list[GoldKey]:
    """Gold task file: JSON list of {document_id, model_name, summary_text, expected, tolerance?}."""
    rows = json.loads(Path(path).read_text("utf-8"))
    keys = []
    for i, row in enumerate(rows):
        keys.append(
            GoldKey(
                task_id=f"gold-{i:03d}",
                document_id=row["document_id"],
                model_name=row["model_name"],
                summary_text=row["summary_text"],
                expected={d: int(row["expected"][d]) for d in DIMENSIONS},
                tolerance=int(row.get("tolerance", 1)),
            )
        )
    return keys


@dataclass
class ServiceConfig:
    seed: int = 0
    gold_rate: float = 0.2
    max_raters_per_task: int = 3
    gold_keys: list[GoldKey] = field(default_factory=list)


@dataclass
class _Task:
    task_id: str
    document_id: str
    model_name: str
    summary_text: str
    is_gold: bool = False
    gold: GoldKey | None = None


@dataclass
class _Session:
    session_id: str
    rater_id: str
    queue: list[str]  # task ids in dispense order
    cursor: int = 0
    pending: str | None = None
    submitted: set[str] = field(default_factory=set)


class TaskPool:
    """Dispenses tasks per session: seeded shuffle, gold interleave, redundancy cap."""

    def __init__(self, corpus: Corpus, store: RunStore, config: ServiceConfig):
        self.corpus = corpus
        self._store = store
        self._config = config
        self._lock = threading.Lock()
        self._sessions: dict[str, _Session] = {}
        self._dispense_counts: dict[str, int] = {}
        self._tasks: dict[str, _Task] = {}
        for s in store.summaries():
            if s.round != 0 or s.document_id not in corpus:
                continue
            task_id = f"task-{hashlib.sha256(f'{s.document_id}:{s.model_name}'.encode()).hexdigest()[:10]}"
            self._tasks[task_id] = _Task(task_id, s.document_id, s.model_name, s.text)
        for key in config.gold_keys:
            if key.document_id not in corpus:
                raise ValueError(f"gold task {key.task_id} references unknown document {key.document_id!r}")
            self._tasks[key.task_id] = _Task(
                key.task_id, key.document_id, key.model_name, key.summary_text, is_gold=True, gold=key
            )

    def register(self, rater_id: str) -> str:
        session_id = uuid.uuid4().hex
        with self._lock:
            queue = self._build_queue(session_id)
            self._sessions[session_id] = _Session(session_id, rater_id, queue)
        return session_id

    def _build_queue(self, session_id: str) -> list[str]:
        # Deterministic given (run seed, session id): shuffle real tasks,
        # then interleave golds at the configured rate.
        seed = int.from_bytes(hashlib.sha256(f"{self._config.seed}:{session_id}".encode()).digest()[:8], "big")
        rng = random.Random(seed)
        real = sorted(t.task_id for t in self._tasks.values() if not t.is_gold)
        golds = sorted(t.task_id for t in self._tasks.values() if t.is_gold)
        rng.shuffle(real)
        n_gold = min(len(golds), round(len(real) * self._config.gold_rate))
        picked = rng.sample(golds, n_gold) if n_gold else []
        queue = list(real)
        for g in picked:
            queue.insert(rng.randrange(len(queue) + 1), g)
        return queue

    def session(self, session_id: str) -> _Session:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise KeyError(session_id) from None

    def next_task(self, session_id: str) -> _Task | None:
        """The session's pending task, or the next dispensable one.

        Re-requesting without submitting returns the same task, so a page
        refresh resumes; a task never reappears after submission.
        """
        with self._lock:
            sess = self.session(session_id)
            if sess.pending is not None:
                return self._tasks[sess.pending]
            while sess.cursor < len(sess.queue):
                task_id = sess.queue[sess.cursor]
                sess.cursor += 1
                task = self._tasks[task_id]
                if not task.is_gold and self._dispense_counts.get(task_id, 0) >= self._config.max_raters_per_task:
                    continue
                self._dispense_counts[task_id] = self._dispense_counts.get(task_id, 0) + 1
                sess.pending = task_id
                return task
            return None

    def progress(self, session_id: str) -> tuple[int, int]:
        sess = self.session(session_id)
        return len(sess.submitted), len(sess.queue)

    def submit(self, session_id: str, task_id: str, scores: dict[str, int]) -> str:
        with self._lock:
            sess = self.session(session_id)
            if task_id in sess.submitted:
                raise DuplicateSubmission(task_id)
            if sess.pending != task_id:
                raise UnknownTask(task_id)
            task = self._tasks[task_id]
            record = RatingRecord(
                document_id=task.document_id,
                model_name=task.model_name,
                evaluator_id=sess.rater_id,
                evaluator_kind="human",
                session_id=session_id,
                is_gold_check=task.is_gold,
                passed_gold=task.gold.passes(scores) if task.gold else None,
                **scores,
            )
            record_id = self._store.append(record)
            sess.submitted.add(task_id)
            sess.pending = None
            return record_id


class UnknownTask(KeyError):
    pass


class DuplicateSubmission(ValueError):
    pass


class RegisterRequest(BaseModel):
    rater_id: str = Field(min_length=1)


class RatingSubmission(BaseModel):
    session_id: str
    task_id: str
    clarity: int
    accuracy: int
    coverage: int
    overall: int


def _task_payload(pool: TaskPool, session_id: str, task: _Task, instructions: str) -> dict:
    # Wire payload: no gold fields, ever.
    done, total = pool.progress(session_id)
    doc = pool.corpus.get(task.document_id)
    return {
        "task_id": task.task_id,
        "document": {"title": doc.title, "abstract": doc.abstract, "claims": doc.claims},
        "summary_text": task.summary_text,
        "instructions": instructions,
        "dimensions": [
            {"name": d, "scale": [{"value": v, "anchor": SCALE_ANCHORS[v]} for v in range(SCALE_MIN, SCALE_MAX + 1)]}
            for d in DIMENSIONS
        ],
        "progress": {"done": done, "total": total},
    }


def create_app(corpus: Corpus, store: RunStore, config: ServiceConfig | None = None) -> FastAPI:
    """Build the annotation service over one run."""
    config = config or ServiceConfig()
    pool = TaskPool(corpus, store, config)
    instructions = instruction_text()

    app = FastAPI(title="sumlab annotation service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"])
    app.state.pool = pool

    @app.post("/sessions")
    def register(body: RegisterRequest):
        session_id = pool.register(body.rater_id)
        return {"session_id": session_id}

    @app.get("/tasks/next")
    def next_task(session: str = Query(...)):
        try:
            task = pool.next_task(session)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {session!r}")
        if task is None:
            done, total = pool.progress(session)
            return {"task": None, "done": True, "progress": {"done": done, "total": total}}
        return {"task": _task_payload(pool, session, task, instructions), "done": False}

    @app.post("/ratings")
    def submit_rating(body: RatingSubmission):
        scores = {d: getattr(body, d) for d in DIMENSIONS}
        for name, value in scores.items():
            if not (SCALE_MIN <= value <= SCALE_MAX):
                raise HTTPException(status_code=400, detail=f"{name} score {value} outside {SCALE_MIN}..{SCALE_MAX}")
        try:
            record_id = pool.submit(body.session_id, body.task_id, scores)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=f"unknown session or task: {exc}")
        except DuplicateSubmission:
            raise HTTPException(status_code=409, detail=f"task {body.task_id!r} already submitted")
        except DuplicateKey as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"ok": True, "record_id": record_id}

    @app.get("/reports/{run_id}/{kind}")
    def report(run_id: str, kind: str):
        if run_id != store.manifest.run_id:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id!r}")
        try:
            text, csv_text = render_table(store, kind)
        except EmptyRun as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"run_id": run_id, "kind": kind, "text": text, "csv": csv_text}

    @app.get("/instructions")
    def get_instructions():
        return {"instructions": instructions}

    return app
