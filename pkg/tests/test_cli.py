import json
import shutil
from pathlib import Path

import pytest

from evirank import cli
from evirank.artifacts import check_artifact, manifest_path, write_artifact
from evirank.config import load_config
from evirank.errors import ConfigError, DataError


def run_cli(*argv) -> int:
    return cli.main(list(argv))


def chain_args(bundle: Path, workdir: Path) -> list[str]:
    return ["--config", str(bundle / "config.json"), "--workdir", str(workdir)]


class TestConfig:
    def test_flag_beats_file_beats_default(self, tmp_path):
        cfg_file = tmp_path / "config.json"
        cfg_file.write_text(json.dumps({"alpha": 0.25, "k": 7}), encoding="utf-8")
        cfg = load_config(cfg_file, {"alpha": 0.75})
        assert cfg.alpha == 0.75  # flag wins
        assert cfg.k == 7  # file wins
        assert cfg.k1 == 0.9  # default

    def test_unknown_key_rejected(self, tmp_path):
        cfg_file = tmp_path / "config.json"
        cfg_file.write_text(json.dumps({"alhpa": 0.5}), encoding="utf-8")
        with pytest.raises(ConfigError, match="alhpa"):
            load_config(cfg_file, {})

    def test_alpha_range_validated(self, tmp_path):
        cfg_file = tmp_path / "config.json"
        cfg_file.write_text(json.dumps({"alpha": 1.5}), encoding="utf-8")
        with pytest.raises(ConfigError, match="alpha"):
            load_config(cfg_file, {})

    def test_relative_paths_resolve_against_config_dir(self, tmp_path):
        sub = tmp_path / "sub"
        sub.mkdir()
        cfg_file = sub / "config.json"
        cfg_file.write_text(json.dumps({"corpus": "data.jsonl"}), encoding="utf-8")
        cfg = load_config(cfg_file, {})
        assert cfg.path("corpus") == sub / "data.jsonl"

    def test_derived_artifact_paths_use_workdir(self, tmp_path):
        cfg_file = tmp_path / "config.json"
        cfg_file.write_text(json.dumps({"workdir": "artifacts"}), encoding="utf-8")
        cfg = load_config(cfg_file, {})
        assert cfg.path("index") == tmp_path / "artifacts" / "index.jsonl"


class TestArtifacts:
    def test_write_and_check(self, tmp_path):
        source = tmp_path / "input.txt"
        source.write_text("source data", encoding="utf-8")
        out = tmp_path / "out.bin"
        write_artifact(out, b"payload", "stage-a", {"input": source})
        check_artifact(out)  # fresh

    def test_stale_input_detected_with_stage_name(self, tmp_path):
        source = tmp_path / "input.txt"
        source.write_text("v1", encoding="utf-8")
        out = tmp_path / "out.bin"
        write_artifact(out, b"payload", "stage-a", {"input": source})
        source.write_text("v2", encoding="utf-8")
        with pytest.raises(DataError, match="stage-a"):
            check_artifact(out)

    def test_tampered_output_detected(self, tmp_path):
        out = tmp_path / "out.bin"
        write_artifact(out, b"payload", "stage-a", {})
        out.write_bytes(b"edited")
        with pytest.raises(DataError, match="modified after stage stage-a"):
            check_artifact(out)

    def test_transitive_staleness(self, tmp_path):
        raw = tmp_path / "raw.txt"
        raw.write_text("v1", encoding="utf-8")
        mid = tmp_path / "mid.bin"
        write_artifact(mid, b"mid", "stage-a", {"raw": raw})
        end = tmp_path / "end.bin"
        write_artifact(end, b"end", "stage-b", {"mid": mid})
        raw.write_text("v2", encoding="utf-8")
        with pytest.raises(DataError, match="stage-a"):
            check_artifact(end)

    def test_plain_file_without_manifest_is_fine(self, tmp_path):
        plain = tmp_path / "plain.txt"
        plain.write_text("anything", encoding="utf-8")
        check_artifact(plain)

    def test_manifest_is_deterministic(self, tmp_path):
        source = tmp_path / "input.txt"
        source.write_text("data", encoding="utf-8")
        out = tmp_path / "out.bin"
        write_artifact(out, b"payload", "stage-a", {"input": source})
        first = manifest_path(out).read_bytes()
        write_artifact(out, b"payload", "stage-a", {"input": source})
        assert manifest_path(out).read_bytes() == first


class TestPipelineCommands:
    def test_full_chain_and_exact_metrics(self, bundle, tmp_path):
        workdir = tmp_path / "out"
        base = chain_args(bundle, workdir)
        for command in ("index", "retrieve", "fuse", "build-train", "train", "rerank"):
            assert run_cli(command, *base) == 0
        assert run_cli("eval", *base, "--run", str(workdir / "combo.run")) == 0
        expected = json.loads((bundle / "expected_metrics.json").read_text())
        produced = json.loads((workdir / "metrics.json").read_text())
        assert produced == expected["combo"]

    def test_rerun_is_byte_identical(self, bundle, tmp_path):
        workdir = tmp_path / "out"
        base = chain_args(bundle, workdir)
        assert run_cli("index", *base) == 0
        assert run_cli("retrieve", *base) == 0
        first_index = (workdir / "index.jsonl").read_bytes()
        first_run = (workdir / "bm25.run").read_bytes()
        assert run_cli("index", *base) == 0
        assert run_cli("retrieve", *base) == 0
        assert (workdir / "index.jsonl").read_bytes() == first_index
        assert (workdir / "bm25.run").read_bytes() == first_run

    def test_missing_corpus_is_usage_error_before_work(self, tmp_path):
        code = run_cli(
            "index", "--corpus", str(tmp_path / "absent.jsonl"),
            "--workdir", str(tmp_path / "out"),
        )
        assert code == 1
        assert not (tmp_path / "out").exists()

    def test_duplicate_doc_id_is_data_error(self, tmp_path):
        corpus = tmp_path / "corpus.jsonl"
        line = json.dumps({"doc_id": 1, "title": "t", "abstract": ["a."]})
        corpus.write_text(line + "\n" + line + "\n", encoding="utf-8")
        code = run_cli("index", "--corpus", str(corpus), "--workdir", str(tmp_path / "out"))
        assert code == 2

    def test_cache_miss_is_data_error(self, bundle, tmp_path):
        workdir = tmp_path / "out"
        base = chain_args(bundle, workdir)
        assert run_cli("index", *base) == 0
        assert run_cli("retrieve", *base) == 0
        truncated = tmp_path / "short.tsv"
        lines = (bundle / "scores.tsv").read_text().splitlines()
        truncated.write_text("\n".join(lines[:5]) + "\n", encoding="utf-8")
        assert run_cli("fuse", *base, "--cache", str(truncated)) == 2

    def test_scorer_protocol_error_maps_to_exit_3(self, bundle, tmp_path, monkeypatch):
        workdir = tmp_path / "out"
        base = chain_args(bundle, workdir)
        assert run_cli("index", *base) == 0
        assert run_cli("retrieve", *base) == 0

        class _Bad:
            status_code = 200
            text = "{}"

            def json(self):
                return {"logits": []}  # always the wrong length

        monkeypatch.setattr("requests.post", lambda *a, **k: _Bad())
        code = run_cli(
            "fuse", *base, "--scorer", "service", "--endpoint", "http://scorer.invalid"
        )
        assert code == 3

    def test_stale_index_aborts_retrieve(self, bundle, tmp_path):
        workdir = tmp_path / "out"
        base = chain_args(bundle, workdir)
        assert run_cli("index", *base) == 0
        corpus_file = bundle / "corpus.jsonl"
        content = corpus_file.read_text(encoding="utf-8")
        corpus_file.write_text(content + "\n", encoding="utf-8")  # touch content
        assert run_cli("retrieve", *base) == 2

    def test_unknown_flag_is_usage_error(self):
        assert run_cli("index", "--definitely-not-a-flag") == 1

    def test_bad_k_list_is_usage_error(self, bundle, tmp_path):
        base = chain_args(bundle, tmp_path / "out")
        assert run_cli("eval", *base, "--k-list", "1,two,3") == 1

    def test_eval_alpha_zero_equals_relevance_only_ranking(self, bundle, tmp_path):
        # fuse at alpha=0 must equal ranking by the relevance signal alone
        workdir = tmp_path / "out"
        base = chain_args(bundle, workdir)
        for command in ("index", "retrieve"):
            assert run_cli(command, *base) == 0
        assert run_cli("fuse", *base, "--alpha", "0.0") == 0
        from evirank import ranking, scoring

        cache = scoring.load_score_cache(bundle / "scores.tsv")
        combo_lists = ranking.read_run(workdir / "combo.run")
        bm25_lists = ranking.read_run(workdir / "bm25.run")
        for claim_id, ranked in combo_lists.items():
            candidates = bm25_lists[claim_id].doc_ids()
            by_relevance = sorted(
                candidates, key=lambda d: (-cache[(claim_id, d)].s_r, d)
            )
            assert ranked.doc_ids() == by_relevance

    def test_rerank_with_external_predictions(self, bundle, tmp_path):
        workdir = tmp_path / "out"
        base = chain_args(bundle, workdir)
        for command in ("index", "retrieve"):
            assert run_cli(command, *base) == 0
        from evirank import ranking

        bm25_lists = ranking.read_run(workdir / "bm25.run")
        preds_path = tmp_path / "preds.jsonl"
        lines = []
        for claim_id, ranked in bm25_lists.items():
            for i, doc_id in enumerate(ranked.doc_ids()):
                # deliberately invert the first-stage order
                lines.append(json.dumps({"claim_id": claim_id, "doc_id": doc_id,
                                         "score": (i + 1) / (len(ranked.entries) + 1)}))
        preds_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        assert run_cli("rerank", *base, "--predictions", str(preds_path)) == 0
        reranked = ranking.read_run(workdir / "reranked.run")
        for claim_id, ranked in reranked.items():
            assert ranked.doc_ids() == list(reversed(bm25_lists[claim_id].doc_ids()))

    def test_eval_writes_leaderboard(self, bundle, tmp_path):
        workdir = tmp_path / "out"
        base = chain_args(bundle, workdir)
        for command in ("index", "retrieve", "fuse"):
            assert run_cli(command, *base) == 0
        board = tmp_path / "board.jsonl"
        assert run_cli("eval", *base, "--leaderboard", str(board)) == 0
        lines = [json.loads(raw) for raw in board.read_text().splitlines()]
        assert len(lines) == 6
        assert all("evidence" in rec for rec in lines)
