"""Small trainable text-pair models over hashed bag-of-words features.

Tokens are hashed with crc32 (stable across processes) into embedding
buckets; a pair is encoded as [claim_vec, doc_vec, claim_vec * doc_vec,
overlap features] so the head sees both content and explicit token-overlap
structure (the overlap scalars are what generalize across vocabularies at
this scale).  The relevance head emits one logit, the verify head three
(SUPPORT, REFUTE, NEI).

Model identifiers accepted everywhere:
  - a checkpoint path produced by the training scripts
  - "untrained:<seed>"  - a freshly initialized model (protocol testing)
  - "hf:<name>"         - reserved for plugging in a downloaded transformer;
                          refused at startup with a clear message since this
                          sidecar runs offline
"""
from __future__ import annotations

import re
import zlib
from pathlib import Path

import torch
from torch import nn

# capacity is deliberately small: these models must generalize from dozens
# of training pairs, so memorizing per-document identities has to be starved
N_BUCKETS = 4096
EMBED_DIM = 8
HIDDEN_DIM = 16

VERIFY_LABELS = ("SUPPORT", "REFUTE", "NEI")

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class ModelError(Exception):
    pass


def tokenize(text: str) -> list[str]:
    # trailing marker token guarantees no empty bag reaches EmbeddingBag
    return _TOKEN_RE.findall(text.lower()) + ["<s>"]


def bucket(token: str) -> int:
    return zlib.crc32(token.encode("utf-8")) % N_BUCKETS


def encode_batch(texts: list[str], device: torch.device) -> tuple[torch.Tensor, torch.Tensor]:
    indices: list[int] = []
    offsets: list[int] = []
    for text in texts:
        offsets.append(len(indices))
        indices.extend(bucket(t) for t in tokenize(text))
    return (
        torch.tensor(indices, dtype=torch.long, device=device),
        torch.tensor(offsets, dtype=torch.long, device=device),
    )


N_PAIR_FEATURES = 3


def pair_features(claim: str, doc: str) -> list[float]:
    """Vocabulary-independent overlap scalars: claim coverage, doc coverage,
    and overlapped token mass on the document side."""
    claim_terms = set(tokenize(claim)[:-1])
    doc_tokens = tokenize(doc)[:-1]
    doc_terms = set(doc_tokens)
    shared = claim_terms & doc_terms
    claim_cov = len(shared) / len(claim_terms) if claim_terms else 0.0
    doc_cov = len(shared) / len(doc_terms) if doc_terms else 0.0
    mass = sum(1 for t in doc_tokens if t in shared) / len(doc_tokens) if doc_tokens else 0.0
    return [claim_cov, doc_cov, mass]


class HashedPairModel(nn.Module):
    def __init__(self, n_outputs: int, n_buckets: int = N_BUCKETS, dim: int = EMBED_DIM):
        super().__init__()
        self.n_outputs = n_outputs
        self.n_buckets = n_buckets
        self.dim = dim
        self.embedding = nn.EmbeddingBag(n_buckets, dim, mode="mean")
        # small init keeps never-trained (out-of-vocabulary) buckets from
        # drowning the overlap features; trained buckets grow as needed
        nn.init.normal_(self.embedding.weight, std=0.05)
        self.head = nn.Sequential(
            nn.Linear(3 * dim + N_PAIR_FEATURES, HIDDEN_DIM),
            nn.ReLU(),
            nn.Linear(HIDDEN_DIM, n_outputs),
        )

    def forward(self, claims: list[str], docs: list[str]) -> torch.Tensor:
        device = self.embedding.weight.device
        c_idx, c_off = encode_batch(claims, device)
        d_idx, d_off = encode_batch(docs, device)
        c_vec = self.embedding(c_idx, c_off)
        d_vec = self.embedding(d_idx, d_off)
        extras = torch.tensor(
            [pair_features(c, d) for c, d in zip(claims, docs)],
            dtype=c_vec.dtype, device=device,
        )
        return self.head(torch.cat([c_vec, d_vec, c_vec * d_vec, extras], dim=-1))

    @torch.no_grad()
    def relevance_logits(self, claims: list[str], docs: list[str]) -> list[float]:
        if self.n_outputs != 1:
            raise ModelError("relevance scoring requires a 1-output model")
        if not claims:
            return []
        return [float(v) for v in self.forward(claims, docs).squeeze(-1)]

    @torch.no_grad()
    def label_probabilities(self, claims: list[str], docs: list[str]) -> list[list[float]]:
        """Softmax over (SUPPORT, REFUTE, NEI), renormalized so each triple
        sums to exactly 1.0 after float rounding."""
        if self.n_outputs != 3:
            raise ModelError("label probabilities require a 3-output model")
        if not claims:
            return []
        probs = torch.softmax(self.forward(claims, docs), dim=-1)
        out = []
        for row in probs:
            values = [max(float(v), 0.0) for v in row]
            total = sum(values)
            out.append([v / total for v in values])
        return out


def fresh_model(kind: str, seed: int) -> HashedPairModel:
    torch.manual_seed(seed)
    return HashedPairModel(n_outputs=1 if kind == "relevance" else 3)


def save_checkpoint(model: HashedPairModel, kind: str, path: str | Path, **metadata) -> None:
    payload = {
        "kind": kind,
        "n_buckets": model.n_buckets,
        "dim": model.dim,
        "n_outputs": model.n_outputs,
        "state_dict": model.state_dict(),
        "metadata": metadata,
    }
    torch.save(payload, str(path))


def load_checkpoint(path: str | Path, expected_kind: str) -> HashedPairModel:
    path = Path(path)
    if not path.exists():
        raise ModelError(f"checkpoint not found: {path}")
    payload = torch.load(str(path), map_location="cpu", weights_only=False)
    if payload.get("kind") != expected_kind:
        raise ModelError(
            f"{path}: checkpoint kind {payload.get('kind')!r} cannot serve {expected_kind!r}"
        )
    model = HashedPairModel(
        n_outputs=payload["n_outputs"], n_buckets=payload["n_buckets"], dim=payload["dim"]
    )
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model


def load_model(identifier: str, kind: str) -> HashedPairModel:
    """Resolve a model identifier (see module docstring) into a ready model."""
    if identifier.startswith("untrained:"):
        seed = int(identifier.split(":", 1)[1])
        model = fresh_model(kind, seed)
        model.eval()
        return model
    if identifier.startswith("hf:"):
        raise ModelError(
            f"{identifier}: transformer checkpoints must be downloaded in advance; "
            "this sidecar runs offline. Train a local checkpoint or use untrained:<seed>."
        )
    return load_checkpoint(identifier, kind)
