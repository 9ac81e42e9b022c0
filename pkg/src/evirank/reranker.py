"""Trainable stand-in for the fused relevance/verification signal.

A pointwise sigmoid-linear regressor over five deterministic text features,
trained by full-batch gradient descent on mean squared error against targets
in [0, 1].  At inference the model reorders first-stage candidates with no
verifier call.  A neural scorer can be dropped in via an external prediction
file with the same contract.

Feature order (fixed): lexical overlap ratio, IDF-weighted overlap, BM25
score min-max normalized within the claim's candidate group, token length
ratio, bias.
"""
from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Claim, Corpus, Document
from .errors import DataError
from .lexical import DEFAULT_B, DEFAULT_K1, InvertedIndex, field_text, tokenize
from .ranking import RankedList, rank_candidates

logger = logging.getLogger(__name__)

FEATURE_NAMES = ("overlap_ratio", "idf_overlap", "bm25_norm", "length_ratio", "bias")

MODEL_FORMAT = "evirank.reranker"
MODEL_VERSION = 1


class Featurizer:
    """Derives per-pair feature vectors from corpus statistics held by the index.

    bm25_norm is min-max scaled over the document group passed to
    features_for_claim, so the group must be the claim's full candidate (or
    training-example) set for the feature to be meaningful.
    """

    def __init__(self, index: InvertedIndex, k1: float = DEFAULT_K1, b: float = DEFAULT_B):
        self.index = index
        self.k1 = k1
        self.b = b

    def features_for_claim(self, claim: Claim, docs: list[Document]) -> np.ndarray:
        claim_terms = tokenize(claim.text, self.index.stopwords)
        raw_bm25 = np.array([self._bm25_one(claim_terms, doc) for doc in docs])
        lo, hi = (raw_bm25.min(), raw_bm25.max()) if len(raw_bm25) else (0.0, 0.0)
        rows = [
            self.featurize(claim_terms, doc, float(lo), float(hi)) for doc in docs
        ]
        return np.array(rows) if rows else np.empty((0, len(FEATURE_NAMES)))

    def featurize(
        self, claim_terms: list[str], doc: Document, bm25_lo: float, bm25_hi: float
    ) -> list[float]:
        doc_tokens = tokenize(field_text(doc, self.index.fields), self.index.stopwords)
        doc_terms = set(doc_tokens)
        unique_claim = sorted(set(claim_terms))
        if unique_claim:
            shared = [t for t in unique_claim if t in doc_terms]
            overlap = len(shared) / len(unique_claim)
            idf_total = sum(self.index.idf(t) for t in unique_claim)
            idf_overlap = (
                sum(self.index.idf(t) for t in shared) / idf_total if idf_total > 0 else 0.0
            )
        else:
            overlap = idf_overlap = 0.0
        raw = self._bm25_one(claim_terms, doc)
        bm25_norm = (raw - bm25_lo) / (bm25_hi - bm25_lo) if bm25_hi > bm25_lo else 0.5
        nc, nd = len(claim_terms), len(doc_tokens)
        length_ratio = min(nc, nd) / max(nc, nd) if max(nc, nd) > 0 else 0.0
        return [overlap, idf_overlap, bm25_norm, length_ratio, 1.0]

    def _bm25_one(self, claim_terms: list[str], doc: Document) -> float:
        doc_tf = Counter(tokenize(field_text(doc, self.index.fields), self.index.stopwords))
        dl = sum(doc_tf.values())
        avgdl = self.index.avg_doc_len
        if avgdl == 0.0:
            return 0.0
        score = 0.0
        for term, qtf in sorted(Counter(claim_terms).items()):
            tf = doc_tf.get(term, 0)
            if tf == 0:
                continue
            idf = self.index.idf(term)
            if idf == 0.0:
                continue
            norm = self.k1 * (1.0 - self.b + self.b * dl / avgdl)
            score += qtf * idf * (tf * (self.k1 + 1.0)) / (tf + norm)
        return score


@dataclass
class Hyperparams:
    learning_rate: float = 0.5
    epochs: int = 500
    seed: int = 0
    init: str = "zero"  # "zero" | "random"


@dataclass
class RerankerModel:
    weights: np.ndarray
    feature_names: tuple[str, ...] = FEATURE_NAMES
    epochs: int = 0
    learning_rate: float = 0.0
    final_loss: float = float("nan")
    seed: int = 0
    losses: list[float] = field(default_factory=list)

    def predict(self, features: np.ndarray) -> np.ndarray:
        return _sigmoid(features @ self.weights)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def mse_loss_and_grad(
    weights: np.ndarray, features: np.ndarray, targets: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean squared error of sigmoid(X @ w) against targets, with its analytic gradient."""
    preds = _sigmoid(features @ weights)
    residual = preds - targets
    loss = float(np.mean(residual**2))
    grad = (2.0 / len(targets)) * (features.T @ (residual * preds * (1.0 - preds)))
    return loss, grad


def train(features: np.ndarray, targets: np.ndarray, hp: Hyperparams | None = None) -> RerankerModel:
    """Full-batch gradient descent; deterministic under a fixed seed."""
    hp = hp or Hyperparams()
    if len(features) == 0:
        raise DataError("cannot train on an empty example set")
    if features.ndim != 2 or features.shape[1] != len(FEATURE_NAMES):
        raise DataError(f"features must be (n, {len(FEATURE_NAMES)}), got {features.shape}")
    targets = np.asarray(targets, dtype=float)
    if targets.min() < 0.0 or targets.max() > 1.0:
        raise DataError("targets must lie in [0, 1]")
    if hp.init == "zero":
        weights = np.zeros(features.shape[1])
    elif hp.init == "random":
        weights = np.random.default_rng(hp.seed).normal(0.0, 0.01, size=features.shape[1])
    else:
        raise DataError(f"unknown init mode {hp.init!r}")
    losses = []
    for epoch in range(hp.epochs):
        loss, grad = mse_loss_and_grad(weights, features, targets)
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise DataError(
                f"non-finite loss/gradient at epoch {epoch} "
                f"(lr={hp.learning_rate}, |w|={np.abs(weights).max():.3g}); lower the learning rate"
            )
        losses.append(loss)
        weights = weights - hp.learning_rate * grad
    final_loss, _ = mse_loss_and_grad(weights, features, targets)
    losses.append(final_loss)
    return RerankerModel(
        weights=weights,
        epochs=hp.epochs,
        learning_rate=hp.learning_rate,
        final_loss=final_loss,
        seed=hp.seed,
        losses=losses,
    )


def features_for_examples(
    examples,
    claims_by_id: dict[int, Claim],
    corpus: Corpus,
    featurizer: Featurizer,
) -> tuple[np.ndarray, np.ndarray]:
    """Stack feature rows and targets for TrainingExamples, grouped per claim."""
    rows: list[np.ndarray] = []
    targets: list[float] = []
    by_claim: dict[int, list] = {}
    for ex in examples:
        by_claim.setdefault(ex.claim_id, []).append(ex)
    for claim_id in sorted(by_claim):
        claim = claims_by_id.get(claim_id)
        if claim is None:
            raise DataError(f"training example references unknown claim {claim_id}")
        group = sorted(by_claim[claim_id], key=lambda e: e.doc_id)
        docs = [corpus.get(e.doc_id) for e in group]
        rows.append(featurizer.features_for_claim(claim, docs))
        targets.extend(e.target for e in group)
    features = np.vstack(rows) if rows else np.empty((0, len(FEATURE_NAMES)))
    return features, np.array(targets)


def rerank(
    model: RerankerModel,
    claim: Claim,
    candidates: RankedList,
    corpus: Corpus,
    featurizer: Featurizer,
    k: int | None = None,
) -> RankedList:
    """Reorder candidates by model prediction; no verifier is consulted."""
    if not candidates.entries:
        raise ValueError(f"claim {claim.claim_id}: empty candidate list")
    docs = [corpus.get(d) for d in candidates.doc_ids()]
    preds = model.predict(featurizer.features_for_claim(claim, docs))
    scored = list(zip(candidates.doc_ids(), (float(p) for p in preds)))
    return rank_candidates(claim.claim_id, scored, k)


def rerank_with_predictions(
    predictions: dict[int, float] | None,
    candidates: RankedList,
    k: int | None = None,
) -> RankedList:
    """Rerank from an external prediction map; missing map keeps input order."""
    if not predictions:
        logger.warning(
            "claim %d: no external predictions; keeping first-stage order", candidates.claim_id
        )
        kept = candidates.entries[:k] if k is not None else candidates.entries
        return rank_candidates(candidates.claim_id, [(e.doc_id, e.score) for e in kept], k)
    missing = [d for d in candidates.doc_ids() if d not in predictions]
    if missing:
        raise DataError(
            f"claim {candidates.claim_id}: external predictions missing docs {missing[:5]}"
        )
    scored = [(d, predictions[d]) for d in candidates.doc_ids()]
    return rank_candidates(candidates.claim_id, scored, k)


def load_external_predictions(path: str | Path) -> dict[int, dict[int, float]]:
    """Parse {claim_id, doc_id, score} lines; scores must lie in [0, 1], pairs unique."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"prediction file not found: {path}")
    predictions: dict[int, dict[int, float]] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            claim_id, doc_id, score = int(raw["claim_id"]), int(raw["doc_id"]), float(raw["score"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
        if not (0.0 <= score <= 1.0):
            raise DataError(f"{path}:{lineno}: score {score} outside [0, 1]")
        per_claim = predictions.setdefault(claim_id, {})
        if doc_id in per_claim:
            raise DataError(f"{path}:{lineno}: duplicate pair ({claim_id}, {doc_id})")
        per_claim[doc_id] = score
    return predictions


def model_to_text(model: RerankerModel) -> str:
    """Versioned, human-diffable text format with full-precision weights."""
    lines = [
        f"format: {MODEL_FORMAT}",
        f"version: {MODEL_VERSION}",
        "features: " + " ".join(model.feature_names),
        "weights: " + " ".join(repr(float(w)) for w in model.weights),
        f"epochs: {model.epochs}",
        f"learning_rate: {model.learning_rate!r}",
        f"final_loss: {model.final_loss!r}",
        f"seed: {model.seed}",
    ]
    return "\n".join(lines) + "\n"


def save_model(model: RerankerModel, path: str | Path) -> None:
    Path(path).write_text(model_to_text(model), encoding="utf-8")


def load_model(path: str | Path) -> RerankerModel:
    path = Path(path)
    if not path.exists():
        raise DataError(f"model file not found: {path}")
    fields: dict[str, str] = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition(":")
        fields[key.strip()] = value.strip()
    try:
        if fields.get("format") != MODEL_FORMAT:
            raise DataError(f"{path}: not a reranker model file")
        if int(fields["version"]) != MODEL_VERSION:
            raise DataError(f"{path}: unsupported model version {fields['version']}")
        names = tuple(fields["features"].split())
        weights = np.array([float(w) for w in fields["weights"].split()])
        if len(names) != len(weights):
            raise DataError(f"{path}: {len(names)} feature names but {len(weights)} weights")
        return RerankerModel(
            weights=weights,
            feature_names=names,
            epochs=int(fields.get("epochs", 0)),
            learning_rate=float(fields.get("learning_rate", 0.0)),
            final_loss=float(fields.get("final_loss", "nan")),
            seed=int(fields.get("seed", 0)),
        )
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: corrupt model file: {exc}") from None
