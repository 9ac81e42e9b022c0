"""Retrieval and verification metrics, plus leaderboard-format export.

Recall@k is micro-averaged over gold (claim, doc) pairs: the numerator
counts gold pairs whose document appears in that claim's top k, the
denominator is the total number of gold pairs across evaluated claims.
Verification scoring is abstract-level and label-only: a prediction is a
true positive iff both the document and the label match gold.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .corpus import NEI, REFUTE, SCIFACT_LABELS, SUPPORT, ClaimRecord
from .errors import DataError
from .ranking import RankedList
from .scoring import LabelProbabilities


@dataclass(frozen=True)
class RetrievalReport:
    k_values: tuple[int, ...]
    recall_by_k: dict[int, float]  # percent
    claim_count: int
    gold_pair_count: int


@dataclass(frozen=True)
class VerificationPrediction:
    claim_id: int
    doc_id: int
    label: str

    def __post_init__(self) -> None:
        if self.label not in (SUPPORT, REFUTE):
            raise DataError(
                f"prediction ({self.claim_id}, {self.doc_id}): label must be SUPPORT or REFUTE "
                "(NEI means no prediction is emitted)"
            )


@dataclass(frozen=True)
class VerificationReport:
    precision: float  # percent
    recall: float
    f1: float
    true_positives: int
    predicted: int
    gold_pairs: int


def recall_at_k(
    ranked_lists: dict[int, RankedList],
    gold: dict[int, dict[int, str]],
    k: int,
) -> float:
    """Percent of gold pairs retrieved in the top k; claims without gold contribute nothing."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    hits = 0
    total = 0
    for claim_id, doc_labels in gold.items():
        if not doc_labels:
            continue
        total += len(doc_labels)
        ranked = ranked_lists.get(claim_id)
        if ranked is None:
            continue
        top = set(ranked.doc_ids()[:k])
        hits += sum(1 for doc_id in doc_labels if doc_id in top)
    if total == 0:
        raise DataError("no gold evidence pairs to evaluate (recall denominator is zero)")
    return 100.0 * hits / total


def retrieval_report(
    ranked_lists: dict[int, RankedList],
    gold: dict[int, dict[int, str]],
    k_values: list[int],
) -> RetrievalReport:
    recall_by_k = {k: recall_at_k(ranked_lists, gold, k) for k in sorted(k_values)}
    gold_pairs = sum(len(docs) for docs in gold.values())
    return RetrievalReport(
        k_values=tuple(sorted(k_values)),
        recall_by_k=recall_by_k,
        claim_count=sum(1 for docs in gold.values() if docs),
        gold_pair_count=gold_pairs,
    )


def predict_labels(
    ranked: RankedList,
    probs_by_pair: dict[tuple[int, int], LabelProbabilities],
    depth: int,
) -> list[VerificationPrediction]:
    """Argmax label per top-`depth` doc; NEI argmax abstains.  Ties: SUPPORT > REFUTE > NEI."""
    predictions = []
    for entry in ranked.entries[:depth]:
        key = (ranked.claim_id, entry.doc_id)
        probs = probs_by_pair.get(key)
        if probs is None:
            raise DataError(f"no verifier probabilities for pair {key}")
        ordered = ((probs.p_support, SUPPORT), (probs.p_refute, REFUTE), (probs.p_nei, NEI))
        best_p, best_label = ordered[0]
        for p, label in ordered[1:]:
            if p > best_p:
                best_p, best_label = p, label
        if best_label != NEI:
            predictions.append(VerificationPrediction(ranked.claim_id, entry.doc_id, best_label))
    return predictions


def verification_metrics(
    predictions: list[VerificationPrediction],
    gold: dict[int, dict[int, str]],
) -> VerificationReport:
    seen: set[tuple[int, int]] = set()
    tp = 0
    for pred in predictions:
        key = (pred.claim_id, pred.doc_id)
        if key in seen:
            raise DataError(f"duplicate prediction for pair {key}")
        seen.add(key)
        if gold.get(pred.claim_id, {}).get(pred.doc_id) == pred.label:
            tp += 1
    gold_pairs = sum(len(docs) for docs in gold.values())
    precision = 100.0 * tp / len(predictions) if predictions else 0.0
    recall = 100.0 * tp / gold_pairs if gold_pairs else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
    return VerificationReport(
        precision=precision,
        recall=recall,
        f1=f1,
        true_positives=tp,
        predicted=len(predictions),
        gold_pairs=gold_pairs,
    )


def export_leaderboard(
    claims: list[ClaimRecord],
    predictions: list[VerificationPrediction],
    path: str | Path,
) -> None:
    """One JSON line per claim: {id, evidence: {doc_id: {label, sentences: []}}}.

    Labels use the SciFact file spelling (REFUTE -> CONTRADICT); sentence
    selection is out of scope so sentences are always empty.
    """
    by_claim: dict[int, list[VerificationPrediction]] = {}
    for pred in predictions:
        by_claim.setdefault(pred.claim_id, []).append(pred)
    lines = []
    for claim, _ in claims:
        evidence = {
            str(pred.doc_id): {"label": SCIFACT_LABELS[pred.label], "sentences": []}
            for pred in sorted(by_claim.get(claim.claim_id, []), key=lambda p: p.doc_id)
        }
        lines.append(json.dumps({"id": claim.claim_id, "claim": claim.text, "evidence": evidence}, sort_keys=True))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def metrics_report(
    retrieval: RetrievalReport,
    verification: VerificationReport | None = None,
) -> dict:
    """JSON-ready report: {recall: {k: value}, verification: {...}, counts: {...}}."""
    report: dict = {
        "recall": {str(k): retrieval.recall_by_k[k] for k in retrieval.k_values},
        "counts": {
            "claims_with_gold": retrieval.claim_count,
            "gold_pairs": retrieval.gold_pair_count,
        },
    }
    if verification is not None:
        report["verification"] = {
            "precision": verification.precision,
            "recall": verification.recall,
            "f1": verification.f1,
            "true_positives": verification.true_positives,
            "predicted": verification.predicted,
        }
    return report
