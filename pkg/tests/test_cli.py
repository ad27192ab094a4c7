from __future__ import annotations

import json

import pytest

from sumlab.cli import demo_vectors_path, load_config, main
from sumlab.refine import RefinementRound, RefinementTranscript, StopRule, verify_hash_chain
from sumlab.runstore import RunStore
from tests.conftest import make_document, write_corpus_file


def build_workspace(tmp_path, n_docs=3, with_judge=True, with_refine=False, metrics=None):
    docs = [make_document(f"d{i}") for i in range(1, n_docs + 1)]
    corpus_path = tmp_path / "corpus.jsonl"
    write_corpus_file(corpus_path, docs)

    for model in ("alpha", "beta"):
        rows = [{"document_id": d.id, "text": f"{model} summary of {d.id}: a method comprising a stream."} for d in docs]
        (tmp_path / f"{model}.jsonl").write_text("\n".join(json.dumps(r) for r in rows) + "\n", "utf-8")

    config = {
        "corpus": "corpus.jsonl",
        "run_dir": "run",
        "seed": 11,
        "models": [
            {"name": "alpha", "mode": "ingest", "path": "alpha.jsonl"},
            {"name": "beta", "mode": "ingest", "path": "beta.jsonl"},
        ],
        "metrics": metrics or ["rouge1", "rouge2", "rougeL", "bleu", "fre", "dcr"],
    }
    if with_judge:
        config["judge"] = {"provider": {"kind": "mock-judge"}, "retries": 1}
    if with_refine:
        config["models"].append({"name": "gen", "mode": "generate", "provider": {"kind": "mock-summarizer"}})
        config["refine"] = {"model": "gen", "max_rounds": 2}
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config), "utf-8")
    return config_path, docs


class TestConfig:
    def test_missing_summary_file_fails_fast(self, tmp_path):
        config_path, _ = build_workspace(tmp_path)
        config = json.loads(config_path.read_text())
        config["models"][0]["path"] = "missing.jsonl"
        config_path.write_text(json.dumps(config))
        assert main(["evaluate", "--config", str(config_path)]) == 2

    def test_unknown_metric_rejected(self, tmp_path):
        config_path, _ = build_workspace(tmp_path, metrics=["rouge9"])
        assert main(["evaluate", "--config", str(config_path)]) == 2

    def test_flag_overrides(self, tmp_path):
        config_path, _ = build_workspace(tmp_path)

        class Flags:
            corpus = None
            run_dir = str(tmp_path / "elsewhere")
            sample_size = 2
            seed = 99
            max_rounds = None
            familiar_words = None

        config = load_config(config_path, Flags())
        assert config.run_dir == tmp_path / "elsewhere"
        assert config.sample_size == 2
        assert config.seed == 99

    def test_bertscore_requires_embedder(self, tmp_path):
        config_path, _ = build_workspace(tmp_path, metrics=["bertscore"])
        assert main(["evaluate", "--config", str(config_path)]) == 2


class TestEvaluate:
    def test_offline_lexical_run(self, tmp_path, capsys):
        config_path, docs = build_workspace(tmp_path)
        assert main(["evaluate", "--config", str(config_path)]) == 0
        out = capsys.readouterr().out
        assert "6 metric reports computed" in out
        store = RunStore.open(tmp_path / "run")
        assert len(store.metrics()) == 6  # 3 docs x 2 ingested models
        report = store.metrics()[0].report
        assert report.rouge1 is not None and report.bertscore is None

    def test_rerun_skips_everything(self, tmp_path, capsys):
        config_path, _ = build_workspace(tmp_path)
        main(["evaluate", "--config", str(config_path)])
        capsys.readouterr()
        assert main(["evaluate", "--config", str(config_path)]) == 0
        assert "0 metric reports computed, 6 already present" in capsys.readouterr().out

    def test_resume_after_interrupt(self, tmp_path, capsys):
        # Simulate a crash at 4/6: keep only the first four persisted reports.
        config_path, docs = build_workspace(tmp_path)
        assert main(["evaluate", "--config", str(config_path)]) == 0
        metrics_path = tmp_path / "run" / "metrics.jsonl"
        lines = metrics_path.read_text().strip().splitlines()
        metrics_path.write_text("\n".join(lines[:4]) + "\n", "utf-8")
        capsys.readouterr()
        assert main(["evaluate", "--config", str(config_path)]) == 0
        out = capsys.readouterr().out
        assert "2 metric reports computed, 4 already present" in out
        assert len(RunStore.open(tmp_path / "run").metrics()) == 6

    def test_model_metrics_with_mocks(self, tmp_path):
        config_path, _ = build_workspace(tmp_path, metrics=["rouge1", "bertscore", "summac"])
        config = json.loads(config_path.read_text())
        config["embedder"] = {"kind": "one-hot", "dim": 2048}
        config["nli"] = {"kind": "exact-match"}
        config_path.write_text(json.dumps(config))
        assert main(["evaluate", "--config", str(config_path)]) == 0
        store = RunStore.open(tmp_path / "run")
        report = store.metrics()[0].report
        assert report.bertscore is not None
        assert report.summac is not None and 0.0 <= report.summac <= 1.0


class TestJudge:
    def test_judgments_persisted(self, tmp_path):
        config_path, _ = build_workspace(tmp_path)
        assert main(["judge", "--config", str(config_path)]) == 0
        store = RunStore.open(tmp_path / "run")
        ratings = store.ratings()
        assert len(ratings) == 6
        assert all(r.evaluator_kind == "llm" and r.evaluator_id == "mock-judge" for r in ratings)

    def test_judge_rerun_idempotent(self, tmp_path):
        config_path, _ = build_workspace(tmp_path)
        main(["judge", "--config", str(config_path)])
        main(["judge", "--config", str(config_path)])
        assert len(RunStore.open(tmp_path / "run").ratings()) == 6


class TestRefine:
    def test_transcripts_with_feedback_chain(self, tmp_path):
        config_path, docs = build_workspace(tmp_path, with_refine=True)
        assert main(["refine", "--config", str(config_path)]) == 0
        store = RunStore.open(tmp_path / "run")
        transcripts = store.transcripts()
        assert len(transcripts) == len(docs)
        for t in transcripts:
            rounds = t.payload["rounds"]
            assert len(rounds) == 2  # mock judge never awards 5 -> full budget
            assert rounds[0]["feedback_text"] in rounds[1]["prompt_text"]
            rebuilt = RefinementTranscript(
                document_id=t.document_id,
                model_name=t.model_name,
                config=StopRule(**t.payload["config"]),
                rounds=[
                    RefinementRound(
                        round=r["round"],
                        summary_text=r["summary_text"],
                        scores=_scores_from(r["scores"]),
                        feedback_text=r["feedback_text"],
                        prompt_text=r["prompt_text"],
                        prompt_sha256=r["prompt_sha256"],
                        chain_sha256=r["chain_sha256"],
                    )
                    for r in rounds
                ],
            )
            assert verify_hash_chain(rebuilt)
        # each round also persisted as a summary record
        gen_rounds = {(s.document_id, s.round) for s in store.summaries() if s.model_name == "gen"}
        assert gen_rounds == {(d.id, r) for d in docs for r in (0, 1)}

    def test_max_rounds_flag(self, tmp_path):
        config_path, docs = build_workspace(tmp_path, with_refine=True)
        assert main(["refine", "--config", str(config_path), "--max-rounds", "1"]) == 0
        store = RunStore.open(tmp_path / "run")
        assert all(len(t.payload["rounds"]) == 1 for t in store.transcripts())

    def test_refine_rerun_idempotent(self, tmp_path, capsys):
        config_path, docs = build_workspace(tmp_path, with_refine=True)
        main(["refine", "--config", str(config_path)])
        capsys.readouterr()
        assert main(["refine", "--config", str(config_path)]) == 0
        assert f"0 transcripts, {len(docs)} already present" in capsys.readouterr().out
        assert len(RunStore.open(tmp_path / "run").transcripts()) == len(docs)


def _scores_from(d):
    from sumlab.judge import JudgeScores

    return JudgeScores(
        clarity=d["clarity"],
        accuracy=d["accuracy"],
        coverage=d["coverage"],
        overall=d["overall"],
        evaluator_id=d["evaluator_id"],
        rationale=d["rationale"],
    )


class TestAnalyze:
    def test_bundled_vectors_kendall_cell(self, tmp_path, capsys):
        out_dir = tmp_path / "analysis"
        out_dir.mkdir()
        code = main(["analyze", "--vectors", str(demo_vectors_path()), "--method", "kendall", "--run-dir", str(out_dir)])
        assert code == 0
        csv_text = (out_dir / "correlations_kendall_file.csv").read_text()
        row = next(l for l in csv_text.splitlines() if l.startswith("human_accuracy,human_overall"))
        assert float(row.split(",")[3]) == pytest.approx(0.8, abs=1e-12)

    def test_run_dir_analysis(self, tmp_path):
        config_path, _ = build_workspace(tmp_path)
        main(["evaluate", "--config", str(config_path)])
        main(["judge", "--config", str(config_path)])
        code = main(["analyze", "--run-dir", str(tmp_path / "run"), "--method", "spearman", "--level", "sample"])
        assert code == 0
        assert (tmp_path / "run" / "correlations_spearman_sample.csv").exists()

    def test_analyze_empty_run_fails(self, tmp_path):
        config_path, _ = build_workspace(tmp_path)
        # create the run dir with no records
        config = load_config(config_path)
        from sumlab.cli import _open_store

        _open_store(config)
        assert main(["analyze", "--run-dir", str(tmp_path / "run")]) == 3


class TestReport:
    def test_report_after_pipeline(self, tmp_path, capsys):
        config_path, _ = build_workspace(tmp_path)
        main(["evaluate", "--config", str(config_path)])
        main(["judge", "--config", str(config_path)])
        capsys.readouterr()
        assert main(["report", "--run-dir", str(tmp_path / "run")]) == 0
        out = capsys.readouterr().out
        assert "== metrics ==" in out and "== judgments ==" in out
        assert (tmp_path / "run" / "report_metrics.csv").exists()
        assert (tmp_path / "run" / "report_judgments.txt").exists()

    def test_empty_run_nonzero_exit(self, tmp_path):
        config_path, _ = build_workspace(tmp_path)
        from sumlab.cli import _open_store

        _open_store(load_config(config_path))
        assert main(["report", "--run-dir", str(tmp_path / "run")]) == 3


class TestIngestRatings:
    def test_csv_ingestion(self, tmp_path):
        config_path, docs = build_workspace(tmp_path)
        from sumlab.cli import _open_store

        _open_store(load_config(config_path))
        csv_path = tmp_path / "ratings.csv"
        lines = ["document_id,model_name,evaluator_id,clarity,accuracy,coverage,overall"]
        for d in docs:
            lines.append(f"{d.id},alpha,rater-9,4,3,3,4")
        csv_path.write_text("\n".join(lines) + "\n", "utf-8")
        assert main(["ingest-ratings", "--run-dir", str(tmp_path / "run"), "--csv", str(csv_path)]) == 0
        store = RunStore.open(tmp_path / "run")
        assert len(store.ratings()) == len(docs)
        assert all(r.evaluator_kind == "human" and r.session_id == "rater-9" for r in store.ratings())
        # idempotent re-ingestion
        assert main(["ingest-ratings", "--run-dir", str(tmp_path / "run"), "--csv", str(csv_path)]) == 0
        assert len(RunStore.open(tmp_path / "run").ratings()) == len(docs)

    def test_missing_columns_rejected(self, tmp_path):
        config_path, _ = build_workspace(tmp_path)
        from sumlab.cli import _open_store

        _open_store(load_config(config_path))
        csv_path = tmp_path / "bad.csv"
        csv_path.write_text("document_id,clarity\nd1,4\n", "utf-8")
        assert main(["ingest-ratings", "--run-dir", str(tmp_path / "run"), "--csv", str(csv_path)]) == 2
