"""Command-line orchestration of the evaluation workflow.

Commands map onto the pipeline stages: evaluate (automatic metrics), judge
(LLM Likert scoring), refine (feedback loop), analyze (correlation
matrices), report (aggregate tables), serve (annotation service), and
ingest-ratings (human ratings from CSV). Every command is resumable: work
already persisted in the run directory is skipped, and re-runs never
duplicate records.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import judge as judge_mod
from . import lexmetrics, modelmetrics, refine, textproc
from .corpus import Corpus, Document, SampleSpec, load_corpus, sample
from .providers import (
    ChatProvider,
    Embedder,
    ExactMatchNli,
    HttpChatProvider,
    HttpEmbedder,
    HttpProviderConfig,
    MockJudgeChat,
    MockSummarizerChat,
    NliProvider,
    OneHotEmbedder,
    ScriptedChatProvider,
)
from .runstore import (
    EmptyRun,
    MetricRecord,
    RatingRecord,
    RunManifest,
    RunStore,
    SummaryRecord,
    TranscriptRecord,
    build_score_vectors,
    render_table,
)
from .stats import METHODS, ScoreVector, correlation_matrix

LEXICAL_METRICS = ("rouge1", "rouge2", "rougeL", "bleu", "fre", "dcr")
MODEL_METRICS = ("bertscore", "summac")
ALL_METRICS = LEXICAL_METRICS + MODEL_METRICS


class ConfigError(ValueError):
    pass


@dataclass
class ModelSpec:
    name: str
    mode: str  # ingest | generate
    path: Path | None = None
    provider: dict | None = None


@dataclass
class RunConfig:
    corpus_path: Path
    run_dir: Path
    models: list[ModelSpec]
    sample_size: int | None = None
    seed: int = 0
    joiner: str = "\n\n"
    metrics: tuple[str, ...] = LEXICAL_METRICS
    embedder: dict | None = None
    nli: dict | None = None
    judge_provider: dict | None = None
    judge_retries: int = 1
    refine_model: str | None = None
    max_rounds: int = refine.DEFAULT_MAX_ROUNDS
    familiar_words: Path | None = None
    gold_threshold: float | None = None
    service: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def model(self, name: str) -> ModelSpec:
        for m in self.models:
            if m.name == name:
                return m
        raise ConfigError(f"model {name!r} is not in the roster")


def load_config(path: str | Path, overrides: argparse.Namespace | None = None) -> RunConfig:
    """Parse and validate the JSON run config; CLI flags win over file values."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc

    base = path.parent

    def _resolve(p: str | None) -> Path | None:
        if p is None:
            return None
        q = Path(p)
        return q if q.is_absolute() else base / q

    models = []
    for row in raw.get("models", []):
        spec = ModelSpec(
            name=row["name"],
            mode=row.get("mode", "ingest"),
            path=_resolve(row.get("path")),
            provider=row.get("provider"),
        )
        if spec.mode not in ("ingest", "generate"):
            raise ConfigError(f"model {spec.name!r}: mode must be ingest or generate")
        if spec.mode == "ingest" and spec.path is None:
            raise ConfigError(f"model {spec.name!r}: ingest mode needs a path")
        if spec.mode == "generate" and spec.provider is None:
            raise ConfigError(f"model {spec.name!r}: generate mode needs a provider")
        models.append(spec)

    sample_cfg = raw.get("sample") or {}
    config = RunConfig(
        corpus_path=_resolve(raw.get("corpus")) or Path(""),
        run_dir=_resolve(raw.get("run_dir")) or Path("runs/default"),
        models=models,
        sample_size=sample_cfg.get("size"),
        seed=int(sample_cfg.get("seed", raw.get("seed", 0))),
        joiner=raw.get("joiner", "\n\n"),
        metrics=tuple(raw.get("metrics", list(LEXICAL_METRICS))),
        embedder=raw.get("embedder"),
        nli=raw.get("nli"),
        judge_provider=(raw.get("judge") or {}).get("provider"),
        judge_retries=int((raw.get("judge") or {}).get("retries", 1)),
        refine_model=(raw.get("refine") or {}).get("model"),
        max_rounds=int((raw.get("refine") or {}).get("max_rounds", refine.DEFAULT_MAX_ROUNDS)),
        familiar_words=_resolve(raw.get("familiar_words")),
        gold_threshold=raw.get("gold_threshold"),
        service=raw.get("service") or {},
        raw=raw,
    )

    if overrides is not None:
        if getattr(overrides, "corpus", None):
            config.corpus_path = Path(overrides.corpus)
        if getattr(overrides, "run_dir", None):
            config.run_dir = Path(overrides.run_dir)
        if getattr(overrides, "sample_size", None) is not None:
            config.sample_size = overrides.sample_size
        if getattr(overrides, "seed", None) is not None:
            config.seed = overrides.seed
        if getattr(overrides, "max_rounds", None) is not None:
            config.max_rounds = overrides.max_rounds
        if getattr(overrides, "familiar_words", None):
            config.familiar_words = Path(overrides.familiar_words)

    unknown = set(config.metrics) - set(ALL_METRICS)
    if unknown:
        raise ConfigError(f"unknown metrics: {sorted(unknown)}")
    if not config.metrics and config.judge_provider is None:
        raise ConfigError("config enables neither metrics nor a judge")
    if not config.corpus_path or not config.corpus_path.exists():
        raise ConfigError(f"corpus file not found: {config.corpus_path}")
    for spec in config.models:
        if spec.mode == "ingest" and not spec.path.exists():
            raise ConfigError(f"summary file for model {spec.name!r} not found: {spec.path}")
    if ("bertscore" in config.metrics) and config.embedder is None:
        raise ConfigError("bertscore enabled but no embedder configured")
    if ("summac" in config.metrics) and config.nli is None:
        raise ConfigError("summac enabled but no nli provider configured")
    if config.refine_model is not None:
        spec = config.model(config.refine_model)
        if spec.mode != "generate":
            raise ConfigError(f"refine model {spec.name!r} must have mode generate")
    return config


def _http_config(cfg: dict) -> HttpProviderConfig:
    try:
        return HttpProviderConfig(
            endpoint=cfg["endpoint"],
            model=cfg["model"],
            api_key_env=cfg.get("api_key_env"),
            timeout=float(cfg.get("timeout", 60.0)),
            max_retries=int(cfg.get("max_retries", 3)),
            max_in_flight=int(cfg.get("max_in_flight", 4)),
        )
    except KeyError as exc:
        raise ConfigError(f"http provider config missing {exc}") from exc


def build_chat_provider(cfg: dict) -> ChatProvider:
    kind = cfg.get("kind")
    if kind == "mock-judge":
        return MockJudgeChat()
    if kind == "mock-summarizer":
        return MockSummarizerChat()
    if kind == "scripted":
        return ScriptedChatProvider(cfg.get("script", []), model_name=cfg.get("model", "scripted-chat"))
    if kind == "openai":
        return HttpChatProvider(_http_config(cfg))
    raise ConfigError(f"unknown chat provider kind {kind!r}")


def build_embedder(cfg: dict) -> Embedder:
    kind = cfg.get("kind")
    if kind == "one-hot":
        return OneHotEmbedder(dim=int(cfg.get("dim", 512)))
    if kind == "openai":
        return HttpEmbedder(_http_config(cfg))
    raise ConfigError(f"unknown embedder kind {kind!r}")


def build_nli(cfg: dict) -> NliProvider:
    kind = cfg.get("kind")
    if kind == "exact-match":
        return ExactMatchNli()
    raise ConfigError(f"unknown nli provider kind {kind!r}")


def _corpus_sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _open_store(config: RunConfig) -> tuple[RunStore, Corpus]:
    full = load_corpus(config.corpus_path)
    if config.sample_size is not None:
        selected = sample(full, SampleSpec(size=config.sample_size, seed=config.seed))
    else:
        selected = full
    corpus_sha = _corpus_sha(config.corpus_path)
    run_id = "r" + hashlib.sha256(f"{corpus_sha}:{config.seed}:{config.sample_size}".encode()).hexdigest()[:12]
    manifest = RunManifest(
        run_id=run_id,
        corpus_sha256=corpus_sha,
        sample_size=config.sample_size,
        seed=config.seed,
        models=tuple(m.name for m in config.models),
        provider_configs={k: v for k, v in config.raw.items() if k in ("models", "judge", "embedder", "nli", "refine")},
    )
    store = RunStore.create(config.run_dir, manifest)
    return store, selected


def _load_ingest_file(path: Path) -> dict[str, str]:
    out: dict[str, str] = {}
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                out[row["document_id"]] = row["text"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ConfigError(f"{path}:{line_no}: bad summary record ({exc})") from exc
    return out


def _ensure_summaries(config: RunConfig, store: RunStore, docs: Corpus) -> dict[str, dict[str, str]]:
    """Ingest or generate every round-0 summary; fail fast on gaps.

    Returns model -> document_id -> summary text.
    """
    # Validate every ingest file covers the sample before doing any work.
    ingested: dict[str, dict[str, str]] = {}
    for spec in config.models:
        if spec.mode != "ingest":
            continue
        table = _load_ingest_file(spec.path)
        missing = [d.id for d in docs if d.id not in table]
        if missing:
            raise ConfigError(f"summary file for {spec.name!r} lacks documents: {missing}")
        ingested[spec.name] = table

    existing = {s.natural_key(): s for s in store.summaries()}
    summaries: dict[str, dict[str, str]] = {}
    for spec in config.models:
        summaries[spec.name] = {}
        provider = build_chat_provider(spec.provider) if spec.mode == "generate" else None
        for doc in docs:
            key = (doc.id, spec.name, 0)
            if key in existing:
                summaries[spec.name][doc.id] = existing[key].text
                continue
            if spec.mode == "ingest":
                text = ingested[spec.name][doc.id]
                record = SummaryRecord(doc.id, spec.name, text, provenance="ingested", round=0)
            else:
                text, _prompt = refine.generate_summary(doc, provider, joiner=config.joiner)
                record = SummaryRecord(doc.id, spec.name, text, provenance="generated", round=0)
            store.append(record)
            summaries[spec.name][doc.id] = text
    return summaries


def _compute_report(
    config: RunConfig,
    doc: Document,
    model_name: str,
    summary_text: str,
    embedder: Embedder | None,
    nli: NliProvider | None,
    familiar: frozenset[str],
) -> lexmetrics.MetricReport:
    enabled = set(config.metrics)
    reference_text = doc.text(config.joiner)
    cand = textproc.tokenize(summary_text)
    ref = textproc.tokenize(reference_text)

    def want(name):
        return name in enabled

    return lexmetrics.MetricReport(
        candidate_id=f"{doc.id}:{model_name}:r0",
        reference_id=doc.id,
        rouge1=lexmetrics.rouge_n(cand, ref, 1) if want("rouge1") else None,
        rouge2=lexmetrics.rouge_n(cand, ref, 2) if want("rouge2") else None,
        rougeL=lexmetrics.rouge_l(cand, ref) if want("rougeL") else None,
        bleu=lexmetrics.bleu(cand, [ref]) if want("bleu") else None,
        bertscore=modelmetrics.bertscore(cand, ref, embedder) if want("bertscore") else None,
        summac=(
            modelmetrics.summac_zs(
                textproc.split_sentences(summary_text), textproc.split_sentences(reference_text), nli
            ).score
            if want("summac")
            else None
        ),
        fre=lexmetrics.fre(summary_text) if want("fre") else None,
        dcr=lexmetrics.dcr(summary_text, familiar) if want("dcr") else None,
    )


def cmd_evaluate(config: RunConfig) -> int:
    store, docs = _open_store(config)
    summaries = _ensure_summaries(config, store, docs)
    embedder = build_embedder(config.embedder) if "bertscore" in config.metrics else None
    nli = build_nli(config.nli) if "summac" in config.metrics else None
    familiar = textproc.load_familiar_words(config.familiar_words)

    computed = skipped = 0
    for spec in config.models:
        for doc in docs:
            if store.has("metric", doc.id, spec.name):
                skipped += 1
                continue
            report = _compute_report(config, doc, spec.name, summaries[spec.name][doc.id], embedder, nli, familiar)
            store.append(MetricRecord(doc.id, spec.name, report))
            computed += 1
    print(f"evaluate: run {store.manifest.run_id}: {computed} metric reports computed, {skipped} already present")
    print(f"artifacts: {store.run_dir / 'metrics.jsonl'}")
    return 0


def cmd_judge(config: RunConfig) -> int:
    if config.judge_provider is None:
        raise ConfigError("no judge provider configured")
    store, docs = _open_store(config)
    summaries = _ensure_summaries(config, store, docs)
    provider = build_chat_provider(config.judge_provider)

    computed = skipped = 0
    for spec in config.models:
        for doc in docs:
            key = (doc.id, spec.name, provider.model_name, "", False)
            if store.has("rating", *key):
                skipped += 1
                continue
            scores = judge_mod.judge_summary(
                doc,
                SummaryRecord(doc.id, spec.name, summaries[spec.name][doc.id]),
                provider,
                retries=config.judge_retries,
                joiner=config.joiner,
            )
            store.append(
                RatingRecord(
                    document_id=doc.id,
                    model_name=spec.name,
                    evaluator_id=provider.model_name,
                    evaluator_kind="llm",
                    rationale=scores.rationale,
                    **scores.as_dict(),
                )
            )
            computed += 1
    print(f"judge: run {store.manifest.run_id}: {computed} judgments, {skipped} already present")
    print(f"artifacts: {store.run_dir / 'ratings.jsonl'}")
    return 0


def _transcript_payload(t: refine.RefinementTranscript) -> dict:
    return {
        "document_id": t.document_id,
        "model_name": t.model_name,
        "config": {
            "max_rounds": t.config.max_rounds,
            "stop_on_max_score": t.config.stop_on_max_score,
            "stop_on_fixed_point": t.config.stop_on_fixed_point,
        },
        "stopped_reason": t.stopped_reason,
        "rounds": [
            {
                "round": r.round,
                "summary_text": r.summary_text,
                "scores": {**r.scores.as_dict(), "evaluator_id": r.scores.evaluator_id, "rationale": r.scores.rationale},
                "feedback_text": r.feedback_text,
                "prompt_text": r.prompt_text,
                "prompt_sha256": r.prompt_sha256,
                "chain_sha256": r.chain_sha256,
            }
            for r in t.rounds
        ],
    }


def cmd_refine(config: RunConfig) -> int:
    if config.refine_model is None:
        raise ConfigError("no refine model configured")
    if config.judge_provider is None:
        raise ConfigError("refine needs a judge provider for feedback")
    store, docs = _open_store(config)
    spec = config.model(config.refine_model)
    gen_provider = build_chat_provider(spec.provider)
    judge_provider = build_chat_provider(config.judge_provider)

    failures = 0
    computed = skipped = 0
    for doc in docs:
        if store.has("transcript", doc.id, spec.name):
            skipped += 1
            continue
        try:
            transcript = refine.refine_loop(
                doc,
                gen_provider,
                judge_provider,
                max_rounds=config.max_rounds,
                judge_retries=config.judge_retries,
                joiner=config.joiner,
            )
        except refine.RefinementAborted as exc:
            print(f"refine: {doc.id}: aborted ({exc.cause})", file=sys.stderr)
            failures += 1
            transcript = exc.transcript
            if not transcript.rounds:
                continue
        store.append(TranscriptRecord(doc.id, spec.name, _transcript_payload(transcript)))
        for rnd in transcript.rounds:
            store.append(SummaryRecord(doc.id, spec.name, rnd.summary_text, provenance="generated", round=rnd.round))
        computed += 1
    print(f"refine: run {store.manifest.run_id}: {computed} transcripts, {skipped} already present, {failures} failures")
    print(f"artifacts: {store.run_dir / 'transcripts.jsonl'}")
    return 1 if failures else 0


def _load_vectors_file(path: Path) -> list[ScoreVector]:
    raw = json.loads(path.read_text("utf-8"))
    rows = raw["vectors"] if isinstance(raw, dict) else raw
    return [ScoreVector(r["label"], tuple(float(v) for v in r["values"]), tuple(r["unit_ids"])) for r in rows]


def demo_vectors_path() -> Path:
    return Path(str(resources.files("sumlab.assets").joinpath("demo_score_vectors.json")))


def cmd_analyze(args: argparse.Namespace) -> int:
    method = args.method
    if method not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}")
    if args.vectors:
        vectors = _load_vectors_file(Path(args.vectors))
        out_dir = Path(args.run_dir) if args.run_dir else Path.cwd()
        level = "file"
    else:
        if not args.run_dir:
            raise ConfigError("analyze needs --run-dir or --vectors")
        store = RunStore.open(Path(args.run_dir))
        level = args.level
        vectors = [v for v in build_score_vectors(store, level=level, gold_threshold=args.gold_threshold) if len(v) >= 3]
        out_dir = store.run_dir
    if len(vectors) < 2:
        raise EmptyRun("not enough score vectors to correlate")

    matrix = correlation_matrix(vectors, method=method)
    stem = f"correlations_{method}_{level}"
    txt_path = out_dir / f"{stem}.txt"
    csv_path = out_dir / f"{stem}.csv"
    txt_path.write_text(matrix.to_text(), "utf-8")
    csv_path.write_text(matrix.to_csv(), "utf-8")
    print(matrix.to_text())
    print(f"artifacts: {txt_path} {csv_path}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    store = RunStore.open(Path(args.run_dir))
    rendered = 0
    for kind in ("metrics", "judgments", "correlations"):
        try:
            text, csv_text = render_table(store, kind)
        except EmptyRun:
            continue
        txt_path = store.run_dir / f"report_{kind}.txt"
        csv_path = store.run_dir / f"report_{kind}.csv"
        txt_path.write_text(text, "utf-8")
        csv_path.write_text(csv_text, "utf-8")
        print(f"== {kind} ==")
        print(text)
        print(f"artifacts: {txt_path} {csv_path}")
        rendered += 1
    if not rendered:
        raise EmptyRun(f"run {store.manifest.run_id} has no reportable records")
    return 0


def cmd_ingest_ratings(args: argparse.Namespace) -> int:
    store = RunStore.open(Path(args.run_dir))
    path = Path(args.csv)
    required = ["document_id", "model_name", "evaluator_id", "clarity", "accuracy", "coverage", "overall"]
    added = skipped = 0
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in required if c not in (reader.fieldnames or [])]
        if missing:
            raise ConfigError(f"ratings CSV lacks columns: {missing}")
        for row in reader:
            record = RatingRecord(
                document_id=row["document_id"],
                model_name=row["model_name"],
                evaluator_id=row["evaluator_id"],
                evaluator_kind="human",
                clarity=int(row["clarity"]),
                accuracy=int(row["accuracy"]),
                coverage=int(row["coverage"]),
                overall=int(row["overall"]),
                session_id=row.get("session_id") or row["evaluator_id"],
            )
            if store.has("rating", *record.natural_key()):
                skipped += 1
            else:
                store.append(record)
                added += 1
    print(f"ingest-ratings: {added} added, {skipped} already present")
    print(f"artifacts: {store.run_dir / 'ratings.jsonl'}")
    return 0


def cmd_serve(config: RunConfig, args: argparse.Namespace) -> int:
    import uvicorn

    from .service import GoldKey, ServiceConfig, create_app, load_gold_keys

    store, docs = _open_store(config)
    gold_path = config.service.get("gold_tasks")
    gold_keys: list[GoldKey] = []
    if gold_path:
        p = Path(gold_path)
        gold_keys = load_gold_keys(p if p.is_absolute() else config.corpus_path.parent / p)
    service_config = ServiceConfig(
        seed=config.seed,
        gold_rate=float(config.service.get("gold_rate", 0.2)),
        max_raters_per_task=int(config.service.get("max_raters_per_task", 3)),
        gold_keys=gold_keys,
    )
    app = create_app(docs, store, service_config)
    if args.ui:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=args.ui, html=True), name="ui")
    host = config.service.get("host", "127.0.0.1")
    port = int(config.service.get("port", 8000))
    print(f"serving annotation UI backend for run {store.manifest.run_id} on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sumlab", description="Summarization evaluation and refinement toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(p):
        p.add_argument("--config", required=True, help="run config JSON")
        p.add_argument("--corpus", help="override corpus path")
        p.add_argument("--run-dir", help="override run directory")
        p.add_argument("--sample-size", type=int, help="override evaluation sample size")
        p.add_argument("--seed", type=int, help="override run seed")
        p.add_argument("--familiar-words", help="override familiar-word list file")

    p = sub.add_parser("evaluate", help="compute automatic metrics for every (document, model) pair")
    add_config_flags(p)

    p = sub.add_parser("judge", help="collect LLM Likert judgments for every (document, model) pair")
    add_config_flags(p)

    p = sub.add_parser("refine", help="run the feedback refinement loop on the configured model")
    add_config_flags(p)
    p.add_argument("--max-rounds", type=int, help="override refinement round budget")

    p = sub.add_parser("analyze", help="correlation meta-analysis over score vectors")
    p.add_argument("--run-dir", help="run directory to analyze")
    p.add_argument("--vectors", help="score-vector JSON file instead of a run directory")
    p.add_argument("--method", default="kendall", choices=METHODS)
    p.add_argument("--level", default="model", choices=("model", "sample"))
    p.add_argument("--gold-threshold", type=float, default=None, help="drop human sessions below this gold pass rate")

    p = sub.add_parser("report", help="render metric/judgment/correlation tables for a run")
    p.add_argument("--run-dir", required=True)

    p = sub.add_parser("serve", help="start the annotation service")
    add_config_flags(p)
    p.add_argument("--ui", help="serve a built annotation client from this directory")

    p = sub.add_parser("ingest-ratings", help="load human ratings from CSV into a run")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--csv", required=True)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "evaluate":
            return cmd_evaluate(load_config(args.config, args))
        if args.command == "judge":
            return cmd_judge(load_config(args.config, args))
        if args.command == "refine":
            return cmd_refine(load_config(args.config, args))
        if args.command == "analyze":
            return cmd_analyze(args)
        if args.command == "report":
            return cmd_report(args)
        if args.command == "ingest-ratings":
            return cmd_ingest_ratings(args)
        if args.command == "serve":
            return cmd_serve(load_config(args.config, args), args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except EmptyRun as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # surfaced with a stable nonzero code for scripting
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
