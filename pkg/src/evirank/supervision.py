"""Training-set construction.

Two procedures: negative sampling from the BM25 top-100 for verifier
fine-tuning (negatives labeled NEI, gold excluded from the pool), and the
reranker training set (fused-score top-20 per claim, union of any gold not
already included; gold targets are 1.0, everything else carries its fused
score).  Per-claim RNG seeds are the global seed XOR the claim id, so adding
claims never reshuffles existing samples.
"""
from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path

from .corpus import NEI, REFUTE, SUPPORT, Claim, ClaimRecord, gold_by_claim
from .errors import DataError
from .ranking import RankedList
from .scoring import ScoreRecord

logger = logging.getLogger(__name__)

RERANK_POOL_DEPTH = 20


@dataclass(frozen=True)
class SamplingConfig:
    n_negatives: int
    pool_depth: int = 100
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.n_negatives < 1:
            raise ValueError(f"n_negatives must be >= 1, got {self.n_negatives}")
        if self.pool_depth < self.n_negatives:
            raise ValueError(
                f"pool_depth ({self.pool_depth}) must be >= n_negatives ({self.n_negatives})"
            )


@dataclass(frozen=True)
class TrainingExample:
    claim_id: int
    doc_id: int
    target: float
    is_gold: bool

    def __post_init__(self) -> None:
        if not (0.0 <= self.target <= 1.0):
            raise DataError(f"pair ({self.claim_id}, {self.doc_id}): target {self.target} outside [0, 1]")
        if self.is_gold != (self.target == 1.0):
            raise DataError(
                f"pair ({self.claim_id}, {self.doc_id}): is_gold={self.is_gold} "
                f"inconsistent with target={self.target} (gold iff target == 1.0)"
            )


def sample_negatives(
    claim: Claim,
    bm25_list: RankedList,
    gold_doc_ids: set[int],
    cfg: SamplingConfig,
) -> list[int]:
    """Uniform sample without replacement from (top pool_depth minus gold)."""
    pool = bm25_list.doc_ids()[: cfg.pool_depth]
    if len(pool) < cfg.pool_depth:
        logger.warning(
            "claim %d: BM25 pool has only %d of %d requested candidates",
            claim.claim_id, len(pool), cfg.pool_depth,
        )
    candidates = [d for d in pool if d not in gold_doc_ids]
    n = min(cfg.n_negatives, len(candidates))
    if n < cfg.n_negatives:
        logger.warning(
            "claim %d: only %d non-gold candidates for %d requested negatives",
            claim.claim_id, n, cfg.n_negatives,
        )
    if n == 0:
        return []
    rng = random.Random(cfg.rng_seed ^ claim.claim_id)
    return rng.sample(candidates, n)


def build_verifier_train_set(
    claims: list[ClaimRecord],
    bm25_lists: dict[int, RankedList],
    cfg: SamplingConfig,
) -> list[tuple[int, int, str]]:
    """(claim_id, doc_id, label) triples: gold pairs keep their label, sampled negatives are NEI."""
    gold = gold_by_claim(claims)
    triples: list[tuple[int, int, str]] = []
    for claim, annotations in claims:
        if claim.claim_id not in bm25_lists:
            raise DataError(f"claim {claim.claim_id} missing from the BM25 run")
        for ann in annotations:
            triples.append((claim.claim_id, ann.doc_id, ann.label))
        gold_ids = set(gold[claim.claim_id])
        for doc_id in sample_negatives(claim, bm25_lists[claim.claim_id], gold_ids, cfg):
            triples.append((claim.claim_id, doc_id, NEI))
    triples.sort(key=lambda t: (t[0], t[1]))
    return triples


def build_reranker_train_set(
    claims: list[ClaimRecord],
    combo_lists: dict[int, RankedList],
    score_records: list[ScoreRecord],
    depth: int = RERANK_POOL_DEPTH,
) -> list[TrainingExample]:
    """Fused-score top-`depth` union gold, per claim; sorted by (claim_id, doc_id)."""
    gold = gold_by_claim(claims)
    by_pair = {(r.claim_id, r.doc_id): r for r in score_records}
    examples: list[TrainingExample] = []
    for claim, _ in claims:
        ranked = combo_lists.get(claim.claim_id)
        if ranked is None:
            logger.warning("claim %d has no fused candidate list; using gold only", claim.claim_id)
            selected: list[int] = []
        else:
            selected = ranked.doc_ids()[:depth]
        chosen = dict.fromkeys(selected)
        for doc_id in sorted(gold.get(claim.claim_id, {})):
            chosen.setdefault(doc_id)
        for doc_id in chosen:
            if doc_id in gold.get(claim.claim_id, {}):
                examples.append(TrainingExample(claim.claim_id, doc_id, target=1.0, is_gold=True))
            else:
                rec = by_pair.get((claim.claim_id, doc_id))
                if rec is None:
                    raise DataError(
                        f"no score record for selected pair ({claim.claim_id}, {doc_id})"
                    )
                examples.append(
                    TrainingExample(claim.claim_id, doc_id, target=rec.s_combo, is_gold=False)
                )
    examples.sort(key=lambda e: (e.claim_id, e.doc_id))
    return examples


# --- train file I/O ----------------------------------------------------------

_VALID_LABELS = {SUPPORT, REFUTE, NEI}


def verifier_train_lines(triples: list[tuple[int, int, str]]) -> list[str]:
    return [
        json.dumps({"claim_id": c, "doc_id": d, "label": label}, sort_keys=True)
        for c, d, label in triples
    ]


def write_verifier_train_file(triples: list[tuple[int, int, str]], path: str | Path) -> None:
    Path(path).write_text("\n".join(verifier_train_lines(triples)) + "\n", encoding="utf-8")


def read_verifier_train_file(path: str | Path) -> list[tuple[int, int, str]]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"verifier train file not found: {path}")
    triples = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            label = str(raw["label"])
            if label not in _VALID_LABELS:
                raise DataError(f"label must be one of {sorted(_VALID_LABELS)}, got {label!r}")
            triples.append((int(raw["claim_id"]), int(raw["doc_id"]), label))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
    return triples


def reranker_train_lines(examples: list[TrainingExample]) -> list[str]:
    return [
        json.dumps(
            {"claim_id": e.claim_id, "doc_id": e.doc_id, "target": e.target, "is_gold": e.is_gold},
            sort_keys=True,
        )
        for e in examples
    ]


def write_reranker_train_file(examples: list[TrainingExample], path: str | Path) -> None:
    Path(path).write_text("\n".join(reranker_train_lines(examples)) + "\n", encoding="utf-8")


def read_reranker_train_file(path: str | Path) -> list[TrainingExample]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"reranker train file not found: {path}")
    examples = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            examples.append(
                TrainingExample(
                    claim_id=int(raw["claim_id"]),
                    doc_id=int(raw["doc_id"]),
                    target=float(raw["target"]),
                    is_gold=bool(raw["is_gold"]),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
    return examples
