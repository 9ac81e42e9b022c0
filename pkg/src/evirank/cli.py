"""Command-line pipeline: index, retrieve, fuse, build-train, train, rerank, eval.

Each command reads and writes the documented file formats, so stages are
independently re-runnable; outputs are written atomically with content-hash
manifests and stale inputs abort with the name of the stage to rerun.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 scorer-protocol
error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import corpus as corpus_mod
from . import evaluation, lexical, ranking, reranker, scoring, supervision
from .artifacts import check_artifact, write_artifact
from .config import PipelineConfig, load_config
from .errors import ConfigError, DataError, EvirankError, ScorerProtocolError

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems map to exit code 1, not argparse's 2
        raise ConfigError(message)


def cmd_index(cfg: PipelineConfig, args) -> None:
    cfg.require_inputs("corpus")
    corpus = corpus_mod.load_corpus(cfg.path("corpus"), strict=cfg.strict)
    index = lexical.build_index(corpus, fields=cfg.index_fields, stopwords=frozenset(cfg.stopwords))
    out = cfg.path("index")
    write_artifact(out, lexical.index_to_bytes(index), "index", {"corpus": cfg.path("corpus")})
    print(f"index: {index.doc_count} documents, {len(index.postings)} terms -> {out}")


def cmd_retrieve(cfg: PipelineConfig, args) -> None:
    cfg.require_inputs("claims", "index")
    check_artifact(cfg.path("index"))
    index = lexical.load_index(cfg.path("index"))
    claims = corpus_mod.load_claims(cfg.path("claims"), strict=cfg.strict)
    lists = []
    for claim, _ in claims:
        ranked = lexical.bm25_search(index, claim, cfg.k, k1=cfg.k1, b=cfg.b, pad=cfg.pad)
        if ranked.entries:
            lists.append(ranked)
    out = cfg.path("bm25_run")
    data = ("\n".join(ranking.run_to_lines(lists, cfg.tag)) + "\n").encode("utf-8")
    write_artifact(out, data, "retrieve", {"claims": cfg.path("claims"), "index": cfg.path("index")})
    print(f"retrieve: {len(lists)}/{len(claims)} claims with candidates at k={cfg.k} -> {out}")


def _binding(cfg: PipelineConfig) -> scoring.ScorerBinding:
    if cfg.scorer == "cache":
        if not cfg.score_cache:
            raise ConfigError("cache-mode scoring requires score_cache")
        cfg.require_inputs("score_cache")
        return scoring.ScorerBinding(mode="cache", cache_path=str(cfg.path("score_cache")))
    if not cfg.endpoint:
        raise ConfigError("service-mode scoring requires endpoint")
    return scoring.ScorerBinding(
        mode="service", endpoint=cfg.endpoint, batch_size=cfg.batch_size, timeout=cfg.timeout
    )


def _score_run(cfg: PipelineConfig, claims, lists) -> list[scoring.ScoreRecord]:
    binding = _binding(cfg)
    corpus = None
    if binding.mode == "service":
        cfg.require_inputs("corpus")
        corpus = corpus_mod.load_corpus(cfg.path("corpus"), strict=cfg.strict)
    return scoring.score_candidates(
        [c for c, _ in claims], lists, binding, cfg.alpha, corpus=corpus
    )


def cmd_fuse(cfg: PipelineConfig, args) -> None:
    cfg.require_inputs("claims", "bm25_run")
    check_artifact(cfg.path("bm25_run"))
    claims = corpus_mod.load_claims(cfg.path("claims"), strict=cfg.strict)
    lists = ranking.read_run(cfg.path("bm25_run"))
    records = _score_run(cfg, claims, lists)
    fused = [
        scoring.rank_by_combo(recs)
        for _, recs in sorted(scoring.group_by_claim(records).items())
    ]
    out = cfg.path("combo_run")
    data = ("\n".join(ranking.run_to_lines(fused, f"{cfg.tag}-combo")) + "\n").encode("utf-8")
    inputs = {"claims": cfg.path("claims"), "bm25_run": cfg.path("bm25_run")}
    if cfg.scorer == "cache":
        inputs["score_cache"] = cfg.path("score_cache")
    write_artifact(out, data, "fuse", inputs)
    print(f"fuse: {len(fused)} claims fused at alpha={cfg.alpha} -> {out}")


def cmd_build_train(cfg: PipelineConfig, args) -> None:
    cfg.require_inputs("claims", "bm25_run", "combo_run")
    check_artifact(cfg.path("bm25_run"))
    check_artifact(cfg.path("combo_run"))
    claims = corpus_mod.load_claims(cfg.path("claims"), strict=cfg.strict)
    bm25_lists = ranking.read_run(cfg.path("bm25_run"))
    combo_lists = ranking.read_run(cfg.path("combo_run"))

    sampling = supervision.SamplingConfig(
        n_negatives=cfg.n_negatives, pool_depth=cfg.pool_depth, rng_seed=cfg.seed
    )
    triples = supervision.build_verifier_train_set(claims, bm25_lists, sampling)
    verifier_out = cfg.path("verifier_train")
    vdata = "\n".join(supervision.verifier_train_lines(triples)) + "\n"
    write_artifact(
        verifier_out, vdata.encode("utf-8"), "build-train",
        {"claims": cfg.path("claims"), "bm25_run": cfg.path("bm25_run")},
    )

    records = _score_run(cfg, claims, combo_lists)
    examples = supervision.build_reranker_train_set(claims, combo_lists, records, depth=cfg.train_depth)
    reranker_out = cfg.path("reranker_train")
    rdata = "\n".join(supervision.reranker_train_lines(examples)) + "\n"
    inputs = {"claims": cfg.path("claims"), "combo_run": cfg.path("combo_run")}
    if cfg.scorer == "cache":
        inputs["score_cache"] = cfg.path("score_cache")
    write_artifact(reranker_out, rdata.encode("utf-8"), "build-train", inputs)
    print(
        f"build-train: {len(triples)} verifier pairs (N={cfg.n_negatives}) -> {verifier_out}; "
        f"{len(examples)} reranker examples -> {reranker_out}"
    )


def cmd_train(cfg: PipelineConfig, args) -> None:
    cfg.require_inputs("corpus", "claims", "index", "reranker_train")
    check_artifact(cfg.path("index"))
    check_artifact(cfg.path("reranker_train"))
    corpus = corpus_mod.load_corpus(cfg.path("corpus"), strict=cfg.strict)
    claims = corpus_mod.load_claims(cfg.path("claims"), corpus=corpus, strict=cfg.strict)
    index = lexical.load_index(cfg.path("index"))
    examples = supervision.read_reranker_train_file(cfg.path("reranker_train"))
    featurizer = reranker.Featurizer(index, k1=cfg.k1, b=cfg.b)
    claims_by_id = {c.claim_id: c for c, _ in claims}
    features, targets = reranker.features_for_examples(examples, claims_by_id, corpus, featurizer)
    hp = reranker.Hyperparams(learning_rate=cfg.learning_rate, epochs=cfg.epochs, seed=cfg.seed)
    model = reranker.train(features, targets, hp)
    out = cfg.path("model")
    write_artifact(
        out, reranker.model_to_text(model).encode("utf-8"), "train",
        {
            "reranker_train": cfg.path("reranker_train"),
            "index": cfg.path("index"),
            "corpus": cfg.path("corpus"),
            "claims": cfg.path("claims"),
        },
    )
    print(
        f"train: {len(examples)} examples, {model.epochs} epochs, "
        f"loss {model.losses[0]:.6f} -> {model.final_loss:.6f} -> {out}"
    )


def cmd_rerank(cfg: PipelineConfig, args) -> None:
    cfg.require_inputs("claims", "bm25_run")
    check_artifact(cfg.path("bm25_run"))
    claims = corpus_mod.load_claims(cfg.path("claims"), strict=cfg.strict)
    lists = ranking.read_run(cfg.path("bm25_run"))
    reranked = []
    inputs = {"claims": cfg.path("claims"), "bm25_run": cfg.path("bm25_run")}
    if cfg.predictions:
        cfg.require_inputs("predictions")
        predictions = reranker.load_external_predictions(cfg.path("predictions"))
        inputs["predictions"] = cfg.path("predictions")
        for claim, _ in claims:
            ranked = lists.get(claim.claim_id)
            if ranked is None:
                continue
            reranked.append(
                reranker.rerank_with_predictions(predictions.get(claim.claim_id), ranked, cfg.rerank_k)
            )
    else:
        cfg.require_inputs("corpus", "index", "model")
        check_artifact(cfg.path("index"))
        check_artifact(cfg.path("model"))
        corpus = corpus_mod.load_corpus(cfg.path("corpus"), strict=cfg.strict)
        index = lexical.load_index(cfg.path("index"))
        model = reranker.load_model(cfg.path("model"))
        featurizer = reranker.Featurizer(index, k1=cfg.k1, b=cfg.b)
        inputs.update({"corpus": cfg.path("corpus"), "index": cfg.path("index"), "model": cfg.path("model")})
        for claim, _ in claims:
            ranked = lists.get(claim.claim_id)
            if ranked is None:
                continue
            reranked.append(reranker.rerank(model, claim, ranked, corpus, featurizer, cfg.rerank_k))
    out = cfg.path("reranked_run")
    data = ("\n".join(ranking.run_to_lines(reranked, f"{cfg.tag}-reranked")) + "\n").encode("utf-8")
    write_artifact(out, data, "rerank", inputs)
    print(f"rerank: {len(reranked)} claims reranked to k={cfg.rerank_k} -> {out}")


def cmd_eval(cfg: PipelineConfig, args) -> None:
    run_path = Path(args.run).resolve() if args.run else cfg.path("combo_run")
    cfg.require_inputs("claims")
    if not run_path.exists():
        raise ConfigError(f"missing input file(s): run ({run_path})")
    check_artifact(run_path)
    claims = corpus_mod.load_claims(cfg.path("claims"), strict=cfg.strict)
    lists = ranking.read_run(run_path)
    gold = corpus_mod.gold_by_claim(claims)
    retrieval = evaluation.retrieval_report(lists, gold, cfg.k_list)

    verification = None
    predictions: list[evaluation.VerificationPrediction] = []
    if cfg.scorer == "cache" and cfg.score_cache and cfg.path("score_cache").exists():
        cache = scoring.load_score_cache(cfg.path("score_cache"))
        probs = {pair: cached.probs for pair, cached in cache.items()}
        for claim, _ in claims:
            ranked = lists.get(claim.claim_id)
            if ranked is None:
                continue
            predictions.extend(evaluation.predict_labels(ranked, probs, cfg.verify_depth))
        verification = evaluation.verification_metrics(predictions, gold)

    report = evaluation.metrics_report(retrieval, verification)
    out = cfg.path("metrics")
    inputs = {"claims": cfg.path("claims"), "run": run_path}
    if verification is not None:
        inputs["score_cache"] = cfg.path("score_cache")
    write_artifact(
        out, (json.dumps(report, indent=2, sort_keys=True) + "\n").encode("utf-8"), "eval", inputs
    )
    if args.leaderboard:
        evaluation.export_leaderboard(claims, predictions, args.leaderboard)
        print(f"eval: leaderboard predictions -> {args.leaderboard}")
    for k in retrieval.k_values:
        print(f"eval: recall@{k} = {retrieval.recall_by_k[k]:.2f}")
    if verification is not None:
        print(
            f"eval: verification P={verification.precision:.2f} "
            f"R={verification.recall:.2f} F1={verification.f1:.2f} (top {cfg.verify_depth})"
        )
    print(f"eval: report -> {out}")


_OVERRIDE_KEYS = (
    "corpus", "claims", "workdir", "index", "bm25_run", "combo_run", "reranked_run",
    "verifier_train", "reranker_train", "model", "metrics", "predictions", "scorer",
    "score_cache", "endpoint", "batch_size", "timeout", "k1", "b", "index_fields",
    "alpha", "k", "rerank_k", "n_negatives", "pool_depth", "seed", "train_depth",
    "verify_depth", "epochs", "learning_rate", "tag",
)


def build_parser() -> _Parser:
    parser = _Parser(prog="evirank", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "index": (cmd_index, "Build and persist the inverted index"),
        "retrieve": (cmd_retrieve, "First-stage BM25 retrieval to a TREC run file"),
        "fuse": (cmd_fuse, "Fuse relevance and verification feedback into a combo run"),
        "build-train": (cmd_build_train, "Emit verifier and reranker training files"),
        "train": (cmd_train, "Train the reference reranker on the training file"),
        "rerank": (cmd_rerank, "Rerank first-stage candidates with a trained model"),
        "eval": (cmd_eval, "Score a run file: Recall@k and verification metrics"),
    }
    for name, (func, help_text) in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--config", help="flat JSON config file")
        p.add_argument("--corpus")
        p.add_argument("--claims")
        p.add_argument("--workdir")
        p.add_argument("--index")
        p.add_argument("--bm25-run", dest="bm25_run")
        p.add_argument("--combo-run", dest="combo_run")
        p.add_argument("--reranked-run", dest="reranked_run")
        p.add_argument("--verifier-train", dest="verifier_train")
        p.add_argument("--reranker-train", dest="reranker_train")
        p.add_argument("--model")
        p.add_argument("--metrics")
        p.add_argument("--predictions", help="external prediction file (rerank)")
        p.add_argument("--k", type=int)
        p.add_argument("--rerank-k", dest="rerank_k", type=int)
        p.add_argument("--alpha", type=float)
        p.add_argument("--k1", type=float)
        p.add_argument("--b", type=float)
        p.add_argument("--index-fields", dest="index_fields", choices=["title_abstract", "abstract"])
        p.add_argument("--n-negatives", dest="n_negatives", type=int)
        p.add_argument("--pool-depth", dest="pool_depth", type=int)
        p.add_argument("--train-depth", dest="train_depth", type=int)
        p.add_argument("--verify-depth", dest="verify_depth", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--epochs", type=int)
        p.add_argument("--learning-rate", dest="learning_rate", type=float)
        p.add_argument("--scorer", choices=["cache", "service"])
        p.add_argument("--cache", dest="score_cache", help="score cache file")
        p.add_argument("--endpoint", help="scorer service base URL")
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--timeout", type=float)
        p.add_argument("--tag")
        p.add_argument("--k-list", dest="k_list_text", help="comma-separated cutoffs, e.g. 1,3,5,10")
        strictness = p.add_mutually_exclusive_group()
        strictness.add_argument("--strict", dest="strict", action="store_true", default=None)
        strictness.add_argument("--lenient", dest="strict", action="store_false", default=None)
        p.add_argument("--pad", action="store_true", default=None,
                       help="pad BM25 results with zero-score documents up to k")
        if name == "eval":
            p.add_argument("--run", help="run file to evaluate (default: the combo run)")
            p.add_argument("--leaderboard", help="also export leaderboard-format predictions")
    return parser


def _overrides_from_args(args) -> dict:
    overrides = {key: getattr(args, key, None) for key in _OVERRIDE_KEYS}
    overrides["strict"] = args.strict
    overrides["pad"] = args.pad
    if getattr(args, "k_list_text", None):
        try:
            overrides["k_list"] = [int(v) for v in args.k_list_text.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"--k-list must be comma-separated integers, got {args.k_list_text!r}")
    return overrides


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = load_config(args.config, _overrides_from_args(args))
        args.func(cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except ScorerProtocolError as exc:
        print(f"scorer protocol error: {exc}", file=sys.stderr)
        return 3
    except EvirankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
