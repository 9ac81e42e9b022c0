"""Offline fine-tuning on the pipeline's training files.

Two entry points: fine-tune the three-way verifier on {claim_id, doc_id,
label} triples (negatives arrive already sampled and labeled NEI), and train
the pointwise neural reranker on targets in [0, 1], emitting the prediction
file the pipeline's rerank stage consumes.  Training is seeded and
single-threaded; determinism holds within torch's CPU guarantees.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path

import torch
from torch import nn

from . import data
from .models import VERIFY_LABELS, HashedPairModel, fresh_model, save_checkpoint

logger = logging.getLogger(__name__)

DEFAULT_EPOCHS = 60
DEFAULT_LR = 5e-3
DEFAULT_BATCH = 16
DEFAULT_WEIGHT_DECAY = 3e-3


def _pair_texts(
    pairs: list[tuple[int, int]],
    claim_texts: dict[int, str],
    doc_texts: dict[int, str],
) -> tuple[list[str], list[str]]:
    claims, docs = [], []
    for claim_id, doc_id in pairs:
        if claim_id not in claim_texts:
            raise data.DataFileError(f"claim {claim_id} not found in claims file")
        if doc_id not in doc_texts:
            raise data.DataFileError(f"doc {doc_id} not found in corpus file")
        claims.append(claim_texts[claim_id])
        docs.append(doc_texts[doc_id])
    return claims, docs


def _minibatches(n: int, batch_size: int, generator: torch.Generator):
    order = torch.randperm(n, generator=generator).tolist()
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def finetune_verifier(
    train_path: str | Path,
    corpus_path: str | Path,
    claims_path: str | Path,
    out_path: str | Path,
    tag: str = "",
    epochs: int = DEFAULT_EPOCHS,
    lr: float = DEFAULT_LR,
    batch_size: int = DEFAULT_BATCH,
    weight_decay: float = DEFAULT_WEIGHT_DECAY,
    seed: int = 0,
) -> HashedPairModel:
    """Cross-entropy fine-tuning over SUPPORT/REFUTE/NEI; checkpoint carries the N tag."""
    torch.set_num_threads(1)
    triples = data.load_verifier_train_file(train_path)
    claim_texts = data.load_claim_texts(claims_path)
    doc_texts = data.load_document_texts(corpus_path)
    claims, docs = _pair_texts([(c, d) for c, d, _ in triples], claim_texts, doc_texts)
    targets = torch.tensor([VERIFY_LABELS.index(label) for _, _, label in triples])

    model = fresh_model("verify", seed)
    model.train()
    optimizer = torch.optim.Adam(model.parameters(), lr=lr, weight_decay=weight_decay)
    loss_fn = nn.CrossEntropyLoss()
    generator = torch.Generator().manual_seed(seed)
    final_loss = float("nan")
    for epoch in range(epochs):
        total = 0.0
        for batch in _minibatches(len(triples), batch_size, generator):
            optimizer.zero_grad()
            logits = model([claims[i] for i in batch], [docs[i] for i in batch])
            loss = loss_fn(logits, targets[batch])
            loss.backward()
            optimizer.step()
            total += float(loss.detach()) * len(batch)
        final_loss = total / len(triples)
    logger.info("verifier fine-tune (tag %s): %d pairs, final loss %.4f", tag, len(triples), final_loss)
    model.eval()
    save_checkpoint(
        model, "verify", out_path,
        tag=tag, epochs=epochs, lr=lr, batch_size=batch_size,
        weight_decay=weight_decay, seed=seed,
        train_pairs=len(triples), final_loss=final_loss,
    )
    return model


def train_neural_reranker(
    train_path: str | Path,
    corpus_path: str | Path,
    claims_path: str | Path,
    out_path: str | Path,
    candidates_path: str | Path | None = None,
    checkpoint_path: str | Path | None = None,
    epochs: int = DEFAULT_EPOCHS,
    lr: float = DEFAULT_LR,
    batch_size: int = DEFAULT_BATCH,
    weight_decay: float = DEFAULT_WEIGHT_DECAY,
    seed: int = 0,
) -> HashedPairModel:
    """Pointwise regression on targets in [0, 1]; writes the external
    prediction file ({claim_id, doc_id, score} lines, scores clipped to [0, 1])
    for the candidate pairs (the training pairs when no run file is given)."""
    torch.set_num_threads(1)
    examples = data.load_reranker_train_file(train_path)
    claim_texts = data.load_claim_texts(claims_path)
    doc_texts = data.load_document_texts(corpus_path)
    claims, docs = _pair_texts([(c, d) for c, d, _ in examples], claim_texts, doc_texts)
    targets = torch.tensor([t for _, _, t in examples], dtype=torch.float32)

    model = fresh_model("relevance", seed)
    model.train()
    optimizer = torch.optim.Adam(model.parameters(), lr=lr, weight_decay=weight_decay)
    loss_fn = nn.MSELoss()
    generator = torch.Generator().manual_seed(seed)
    for epoch in range(epochs):
        for batch in _minibatches(len(examples), batch_size, generator):
            optimizer.zero_grad()
            logits = model([claims[i] for i in batch], [docs[i] for i in batch]).squeeze(-1)
            loss = loss_fn(torch.sigmoid(logits), targets[batch])
            loss.backward()
            optimizer.step()
    model.eval()

    if candidates_path is not None:
        score_pairs = data.load_run_pairs(candidates_path)
    else:
        score_pairs = [(c, d) for c, d, _ in examples]
    c_texts, d_texts = _pair_texts(score_pairs, claim_texts, doc_texts)
    with torch.no_grad():
        logits = model(c_texts, d_texts).squeeze(-1)
        scores = torch.sigmoid(logits).clamp(0.0, 1.0).tolist()
    lines = [
        json.dumps({"claim_id": c, "doc_id": d, "score": float(s)}, sort_keys=True)
        for (c, d), s in zip(score_pairs, scores)
    ]
    Path(out_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info("reranker: trained on %d pairs, scored %d -> %s", len(examples), len(score_pairs), out_path)

    if checkpoint_path is not None:
        save_checkpoint(
            model, "relevance", checkpoint_path,
            epochs=epochs, lr=lr, batch_size=batch_size,
            weight_decay=weight_decay, seed=seed, train_pairs=len(examples),
        )
    return model
