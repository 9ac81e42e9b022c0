"""Deterministic desk-scale test bundle: corpus, claims, scripted verifier
scores, pipeline config, and an expected-metrics file.

The bundle is built so that fusing verification feedback visibly pays off:
one claim's gold document is lexically weak but verification-strong (a
distractor wins BM25), one claim has the converse (a lexically strong
candidate the scripted verifier rejects), so fused Recall@1 beats BM25
Recall@1 by construction.  Expected metrics are frozen by running the actual
command chain in a scratch directory, never computed by hand.
"""
from __future__ import annotations

import argparse
import json
import random
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .corpus import REFUTE, SUPPORT
from .errors import EvirankError
from .scoring import CachedScore, LabelProbabilities, write_score_cache

# Parameters shared between the bundle's config.json and the frozen metrics.
FIXTURE_PARAMS = {
    "scorer": "cache",
    "score_cache": "scores.tsv",
    "k": 10,
    "rerank_k": 10,
    "k_list": [1, 3, 5, 10],
    "verify_depth": 3,
    "alpha": 0.5,
    "train_depth": 20,
    "n_negatives": 3,
    "pool_depth": 10,
    "epochs": 300,
    "learning_rate": 0.5,
    "pad": True,
}

_DEFAULT_S_R = 0.15
_DEFAULT_PROBS = (0.05, 0.05, 0.90)

_CONSONANTS = "bcdfgklmnprstvz"
_VOWELS = "aeiou"

# Fixed stance sentences appended to abstracts.  Claims never contain these
# words, so BM25 term matching is untouched; they exist so a verifier
# fine-tuned on the bundle has a learnable (but deliberately imperfect)
# textual signal: every gold document carries the stance matching its label,
# while one relevant-but-not-evidential distractor carries a misleading
# stance and the rest stay neutral.
STANCE_SUPPORT = "findings strongly confirm this association."
STANCE_REFUTE = "findings strongly contradict this association."
STANCE_NEUTRAL = "background methods are described without outcome claims."


@dataclass(frozen=True)
class FixtureBundle:
    root: Path
    corpus_path: Path
    claims_path: Path
    cache_path: Path
    config_path: Path
    expected_path: Path
    seed: int


def _word_pool(rng: random.Random, n: int) -> list[str]:
    seen: set[str] = set()
    pool: list[str] = []
    while len(pool) < n:
        word = "".join(rng.choice(_CONSONANTS) + rng.choice(_VOWELS) for _ in range(3))
        if word not in seen:
            seen.add(word)
            pool.append(word)
    return pool


def generate_fixture(seed: int, out_dir: str | Path) -> FixtureBundle:
    """Write a self-consistent bundle into out_dir and freeze its expected metrics."""
    rng = random.Random(seed)
    pool = _word_pool(rng, 160)
    take = lambda n: [pool.pop() for _ in range(n)]

    topics = [take(5) for _ in range(6)]
    claim_ids = sorted(rng.sample(range(100, 10_000), 6))
    doc_ids = sorted(rng.sample(range(10_000, 100_000), 20))
    slots = iter(doc_ids)
    ids = {name: next(slots) for name in "ABCDEFGHIJKL"}
    filler_ids = list(slots)

    t0, t1, t2, t3, t4, t5 = topics
    docs = {
        # claim 0: distractor A dominates BM25; gold B shares one term only
        "A": (t0[:3], [t0, t0[1:4] + take(1)]),
        "B": (take(2), [[t0[0]] + take(3), take(4)]),
        # claim 1: gold C is lexically strong; D is relevant but not evidential
        # (D also carries a misleading stance sentence)
        "C": (t1[:3], [t1, t1[2:] + take(1)]),
        "D": (t1[:2], [t1[:3] + take(2)]),
        # claim 2: refuting gold F sits behind distractor E in BM25
        "E": (t2[:3], [t2[:4] + take(1), t2[1:4]]),
        "F": ([t2[0]] + take(1), [t2[:2] + take(2), take(3)]),
        # claim 3: no gold evidence at all
        "G": (t3[:2], [t3[:3] + take(2)]),
        "H": ([t3[0]], [t3[:2] + take(3)]),
        # claim 4: two gold documents, one lexically weak
        "I": (t4[:3], [t4, t4[1:] + take(1)]),
        "J": (take(2), [t4[:2] + take(2), take(3)]),
        # claim 5: straightforward supported claim
        "K": (t5[:4], [t5, take(2) + t5[:2]]),
        "L": (t5[:2], [t5[:2] + take(3)]),
    }
    stance = {
        "B": STANCE_SUPPORT, "C": STANCE_SUPPORT, "I": STANCE_SUPPORT,
        "J": STANCE_SUPPORT, "K": STANCE_SUPPORT,
        "F": STANCE_REFUTE,
        "D": STANCE_SUPPORT,  # stance words without evidential value
        "A": STANCE_NEUTRAL, "E": STANCE_NEUTRAL, "G": STANCE_NEUTRAL,
        "H": STANCE_NEUTRAL, "L": STANCE_NEUTRAL,
    }

    corpus_lines = []
    for name in sorted(ids, key=lambda n: ids[n]):
        title_words, sentences = docs[name]
        corpus_lines.append(_doc_line(ids[name], title_words, sentences, stance[name]))
    for i, doc_id in enumerate(filler_ids):
        corpus_lines.append(
            _doc_line(doc_id, take(2), [take(5), take(4)],
                      STANCE_NEUTRAL if i % 2 == 0 else None)
        )
    corpus_lines.sort(key=lambda line: json.loads(line)["doc_id"])

    gold = {
        0: {"B": SUPPORT},
        1: {"C": SUPPORT},
        2: {"F": REFUTE},
        3: {},
        4: {"I": SUPPORT, "J": SUPPORT},
        5: {"K": SUPPORT},
    }
    claims_lines = []
    for i, claim_id in enumerate(claim_ids):
        evidence = {
            str(ids[name]): [{"label": "SUPPORT" if label == SUPPORT else "CONTRADICT", "sentences": [0]}]
            for name, label in gold[i].items()
        }
        claims_lines.append(
            json.dumps({"id": claim_id, "claim": " ".join(topics[i]), "evidence": evidence}, sort_keys=True)
        )

    special = {
        (0, "A"): (0.85, (0.03, 0.02, 0.95)),
        (0, "B"): (0.40, (0.96, 0.02, 0.02)),
        (1, "C"): (0.85, (0.90, 0.03, 0.07)),
        (1, "D"): (0.75, (0.02, 0.02, 0.96)),
        (2, "E"): (0.80, (0.04, 0.04, 0.92)),
        (2, "F"): (0.50, (0.02, 0.93, 0.05)),
        (3, "G"): (0.60, (0.50, 0.05, 0.45)),
        (3, "H"): (0.55, (0.04, 0.04, 0.92)),
        (4, "I"): (0.80, (0.88, 0.04, 0.08)),
        (4, "J"): (0.35, (0.91, 0.03, 0.06)),
        (5, "K"): (0.90, (0.92, 0.03, 0.05)),
        (5, "L"): (0.45, (0.05, 0.05, 0.90)),
    }
    cache: dict[tuple[int, int], CachedScore] = {}
    for i, claim_id in enumerate(claim_ids):
        for doc_id in doc_ids:
            cache[(claim_id, doc_id)] = CachedScore(
                s_r=_DEFAULT_S_R, probs=LabelProbabilities(*_DEFAULT_PROBS)
            )
    for (claim_idx, name), (s_r, probs) in special.items():
        cache[(claim_ids[claim_idx], ids[name])] = CachedScore(
            s_r=s_r, probs=LabelProbabilities(*probs)
        )

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus_path = out_dir / "corpus.jsonl"
    claims_path = out_dir / "claims.jsonl"
    cache_path = out_dir / "scores.tsv"
    config_path = out_dir / "config.json"
    expected_path = out_dir / "expected_metrics.json"

    corpus_path.write_text("\n".join(corpus_lines) + "\n", encoding="utf-8")
    claims_path.write_text("\n".join(claims_lines) + "\n", encoding="utf-8")
    write_score_cache(cache, cache_path)
    config = {
        "corpus": "corpus.jsonl",
        "claims": "claims.jsonl",
        "workdir": "out",
        "seed": seed,
        **FIXTURE_PARAMS,
    }
    config_path.write_text(json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    expected = _freeze_expected_metrics(config_path)
    expected_path.write_text(json.dumps(expected, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return FixtureBundle(
        root=out_dir,
        corpus_path=corpus_path,
        claims_path=claims_path,
        cache_path=cache_path,
        config_path=config_path,
        expected_path=expected_path,
        seed=seed,
    )


def _doc_line(
    doc_id: int, title_words: list[str], sentences: list[list[str]], stance: str | None = None
) -> str:
    abstract = [" ".join(words) + "." for words in sentences]
    if stance is not None:
        abstract.append(stance)
    return json.dumps(
        {"doc_id": doc_id, "title": " ".join(title_words), "abstract": abstract},
        sort_keys=True,
    )


def run_pipeline(config_path: str | Path, workdir: str | Path) -> dict[str, dict]:
    """Run the full command chain; returns the eval report per run (bm25/combo/reranked)."""
    from . import cli

    config_path = Path(config_path)
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    base = ["--config", str(config_path), "--workdir", str(workdir)]
    for command in (["index"], ["retrieve"], ["fuse"], ["build-train"], ["train"], ["rerank"]):
        code = cli.main(command + base)
        if code != 0:
            raise EvirankError(f"pipeline stage {command[0]} failed with exit code {code}")
    reports = {}
    for run_name, run_file in (("bm25", "bm25.run"), ("combo", "combo.run"), ("reranked", "reranked.run")):
        metrics_path = workdir / f"metrics_{run_name}.json"
        code = cli.main(
            ["eval", *base, "--run", str(workdir / run_file), "--metrics", str(metrics_path)]
        )
        if code != 0:
            raise EvirankError(f"eval of {run_name} run failed with exit code {code}")
        reports[run_name] = json.loads(metrics_path.read_text(encoding="utf-8"))
    return reports


def _freeze_expected_metrics(config_path: Path) -> dict:
    with tempfile.TemporaryDirectory(prefix="evirank-fixture-") as scratch:
        reports = run_pipeline(config_path, Path(scratch) / "out")
    bm25_r1 = reports["bm25"]["recall"]["1"]
    combo_r1 = reports["combo"]["recall"]["1"]
    if not combo_r1 > bm25_r1:
        raise EvirankError(
            f"fixture construction failed: fused Recall@1 ({combo_r1}) "
            f"must exceed BM25 Recall@1 ({bm25_r1})"
        )
    return {"k_list": FIXTURE_PARAMS["k_list"], **reports}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Generate the deterministic test bundle")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    bundle = generate_fixture(args.seed, args.out)
    print(f"fixture bundle (seed {bundle.seed}) -> {bundle.root}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
