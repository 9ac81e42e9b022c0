"""Per-pair signals and their fusion.

Two signals per (claim, doc) pair: semantic relevance s_r (a reranker logit
squashed through the logistic sigmoid into [0,1]) and verification feedback
s_v (the probability mass a verifier puts on SUPPORT plus REFUTE, i.e. how
evidential the document looks).  The fused score is
s_combo = alpha * s_v + (1 - alpha) * s_r.

Signals come from a tab-separated score cache or from the scorer-service
sidecar over HTTP; a pair missing from a cache is a hard error, never a
silent zero.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

from .corpus import Claim, Corpus, document_text
from .errors import ConfigError, DataError, ScorerProtocolError
from .ranking import RankedList, rank_candidates

logger = logging.getLogger(__name__)

PROB_SUM_TOL = 1e-6
COMBO_TOL = 1e-9


@dataclass(frozen=True)
class LabelProbabilities:
    """Verifier distribution over {SUPPORT, REFUTE, NEI}; must sum to 1."""

    p_support: float
    p_refute: float
    p_nei: float

    def __post_init__(self) -> None:
        for name, p in (("p_support", self.p_support), ("p_refute", self.p_refute), ("p_nei", self.p_nei)):
            if not (0.0 <= p <= 1.0):
                raise DataError(f"{name}={p} outside [0, 1]")
        total = self.p_support + self.p_refute + self.p_nei
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise DataError(f"label probabilities sum to {total}, expected 1 within {PROB_SUM_TOL}")


def verification_feedback(probs: LabelProbabilities) -> float:
    """Support plus refute probability; the NEI mass is deliberately ignored."""
    return probs.p_support + probs.p_refute


def normalize_relevance(raw_logit: float) -> float:
    """Logistic sigmoid of a reranker logit; strictly increasing, range (0, 1).

    The result is clamped into the open interval: float saturation to an
    exact 0.0 or 1.0 would let a non-gold pair masquerade as gold supervision
    (gold is the only source of target == 1.0).
    """
    if not math.isfinite(raw_logit):
        raise ValueError(f"relevance logit must be finite, got {raw_logit}")
    if raw_logit >= 0:
        value = 1.0 / (1.0 + math.exp(-raw_logit))
    else:
        z = math.exp(raw_logit)
        value = z / (1.0 + z)
    return min(max(value, math.nextafter(0.0, 1.0)), math.nextafter(1.0, 0.0))


def combo_score(s_v: float, s_r: float, alpha: float) -> float:
    for name, v in (("s_v", s_v), ("s_r", s_r), ("alpha", alpha)):
        if not (0.0 <= v <= 1.0):
            raise ValueError(f"{name}={v} outside [0, 1]")
    return alpha * s_v + (1.0 - alpha) * s_r


@dataclass(frozen=True)
class ScoreRecord:
    claim_id: int
    doc_id: int
    s_r: float
    s_v: float
    alpha: float
    s_combo: float

    @classmethod
    def fuse(cls, claim_id: int, doc_id: int, s_r: float, s_v: float, alpha: float) -> "ScoreRecord":
        return cls(claim_id=claim_id, doc_id=doc_id, s_r=s_r, s_v=s_v, alpha=alpha,
                   s_combo=combo_score(s_v, s_r, alpha))

    def validate(self) -> None:
        for name, v in (("s_r", self.s_r), ("s_v", self.s_v), ("alpha", self.alpha), ("s_combo", self.s_combo)):
            if not (0.0 <= v <= 1.0):
                raise DataError(f"pair ({self.claim_id}, {self.doc_id}): {name}={v} outside [0, 1]")
        expected = self.alpha * self.s_v + (1.0 - self.alpha) * self.s_r
        if abs(self.s_combo - expected) > COMBO_TOL:
            raise DataError(
                f"pair ({self.claim_id}, {self.doc_id}): s_combo={self.s_combo} "
                f"does not recompute from s_v/s_r/alpha (expected {expected})"
            )


@dataclass(frozen=True)
class CachedScore:
    s_r: float
    probs: LabelProbabilities


@dataclass(frozen=True)
class ScorerBinding:
    """Exactly one score source: a cache file or the sidecar endpoint."""

    mode: str  # "cache" | "service"
    cache_path: str | None = None
    endpoint: str | None = None
    batch_size: int = 32
    timeout: float = 30.0
    retries: int = 2

    def __post_init__(self) -> None:
        if self.mode == "cache":
            if not self.cache_path or self.endpoint:
                raise ConfigError("cache mode requires cache_path and no endpoint")
        elif self.mode == "service":
            if not self.endpoint or self.cache_path:
                raise ConfigError("service mode requires endpoint and no cache_path")
            if self.batch_size < 1:
                raise ConfigError("batch_size must be >= 1")
        else:
            raise ConfigError(f"scorer mode must be 'cache' or 'service', got {self.mode!r}")


def load_score_cache(path: str | Path) -> dict[tuple[int, int], CachedScore]:
    """Parse a cache file: claim_id, doc_id, s_r, p_support, p_refute, p_nei (TSV)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"score cache not found: {path}")
    cache: dict[tuple[int, int], CachedScore] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 6:
            raise DataError(f"{path}:{lineno}: expected 6 tab-separated fields, got {len(parts)}")
        try:
            claim_id, doc_id = int(parts[0]), int(parts[1])
            s_r = float(parts[2])
            probs = LabelProbabilities(float(parts[3]), float(parts[4]), float(parts[5]))
        except (ValueError, DataError) as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
        if not (0.0 <= s_r <= 1.0):
            raise DataError(f"{path}:{lineno}: s_r={s_r} outside [0, 1]")
        key = (claim_id, doc_id)
        if key in cache:
            raise DataError(f"{path}:{lineno}: duplicate pair {key}")
        cache[key] = CachedScore(s_r=s_r, probs=probs)
    return cache


def write_score_cache(cache: dict[tuple[int, int], CachedScore], path: str | Path) -> None:
    lines = []
    for (claim_id, doc_id), rec in sorted(cache.items()):
        p = rec.probs
        lines.append(
            f"{claim_id}\t{doc_id}\t{rec.s_r:.9f}\t{p.p_support:.9f}\t{p.p_refute:.9f}\t{p.p_nei:.9f}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def score_candidates(
    claims: list[Claim],
    ranked_lists: dict[int, RankedList],
    binding: ScorerBinding,
    alpha: float,
    corpus: Corpus | None = None,
) -> list[ScoreRecord]:
    """One ScoreRecord per (claim, candidate) pair, deterministically ordered.

    Cache mode requires every pair to be present.  Service mode additionally
    needs the corpus for document texts; requests are batched and retried.
    """
    if not (0.0 <= alpha <= 1.0):
        raise ConfigError(f"alpha={alpha} outside [0, 1]")
    pairs: list[tuple[Claim, int]] = []
    for claim in sorted(claims, key=lambda c: c.claim_id):
        ranked = ranked_lists.get(claim.claim_id)
        if ranked is None:
            continue
        for entry in ranked.entries:
            pairs.append((claim, entry.doc_id))
    if binding.mode == "cache":
        cache = load_score_cache(binding.cache_path)
        scored = []
        for claim, doc_id in pairs:
            key = (claim.claim_id, doc_id)
            if key not in cache:
                raise DataError(f"score cache {binding.cache_path} missing pair {key}")
            scored.append(cache[key])
    else:
        if corpus is None:
            raise ConfigError("service-mode scoring requires the corpus for document texts")
        scored = _score_via_service(pairs, binding, corpus)
    records = []
    for (claim, doc_id), cached in zip(pairs, scored):
        s_v = verification_feedback(cached.probs)
        records.append(ScoreRecord.fuse(claim.claim_id, doc_id, cached.s_r, s_v, alpha))
    return records


def rank_by_combo(records: list[ScoreRecord], k: int | None = None) -> RankedList:
    """Descending s_combo, ties by ascending doc_id, truncated to k."""
    if not records:
        raise ValueError("rank_by_combo needs at least one record")
    claim_ids = {r.claim_id for r in records}
    if len(claim_ids) != 1:
        raise ValueError(f"records span multiple claims: {sorted(claim_ids)}")
    return rank_candidates(claim_ids.pop(), [(r.doc_id, r.s_combo) for r in records], k)


def group_by_claim(records: list[ScoreRecord]) -> dict[int, list[ScoreRecord]]:
    grouped: dict[int, list[ScoreRecord]] = {}
    for rec in records:
        grouped.setdefault(rec.claim_id, []).append(rec)
    return grouped


# --- scorer-service client -------------------------------------------------

RELEVANCE_ROUTE = "/v1/relevance"
VERIFY_ROUTE = "/v1/verify"


def _score_via_service(
    pairs: list[tuple[Claim, int]],
    binding: ScorerBinding,
    corpus: Corpus,
) -> list[CachedScore]:
    bodies = [{"claim": claim.text, "doc": document_text(corpus.get(doc_id))} for claim, doc_id in pairs]
    logits: list[float] = []
    probs: list[LabelProbabilities] = []
    for start in range(0, len(bodies), binding.batch_size):
        batch = bodies[start : start + binding.batch_size]
        rel = _post_batch(binding, RELEVANCE_ROUTE, batch)
        ver = _post_batch(binding, VERIFY_ROUTE, batch)
        raw_logits = rel.get("logits")
        raw_probs = ver.get("probs")
        if not isinstance(raw_logits, list) or len(raw_logits) != len(batch):
            raise ScorerProtocolError(
                f"{RELEVANCE_ROUTE}: expected {len(batch)} logits, got {raw_logits!r:.80}"
            )
        if not isinstance(raw_probs, list) or len(raw_probs) != len(batch):
            raise ScorerProtocolError(
                f"{VERIFY_ROUTE}: expected {len(batch)} probability triples, got {len(raw_probs or [])}"
            )
        logits.extend(float(x) for x in raw_logits)
        for triple in raw_probs:
            if not isinstance(triple, (list, tuple)) or len(triple) != 3:
                raise ScorerProtocolError(f"{VERIFY_ROUTE}: malformed probability triple {triple!r}")
            try:
                probs.append(LabelProbabilities(float(triple[0]), float(triple[1]), float(triple[2])))
            except DataError as exc:
                raise ScorerProtocolError(f"{VERIFY_ROUTE}: {exc}") from None
    return [CachedScore(s_r=normalize_relevance(logit), probs=p) for logit, p in zip(logits, probs)]


def _post_batch(binding: ScorerBinding, route: str, batch: list[dict]) -> dict:
    import requests

    url = binding.endpoint.rstrip("/") + route
    last_error: Exception | None = None
    for attempt in range(binding.retries + 1):
        try:
            resp = requests.post(url, json={"pairs": batch}, timeout=binding.timeout)
        except requests.RequestException as exc:
            last_error = exc
            logger.warning("scorer request to %s failed (attempt %d): %s", url, attempt + 1, exc)
            continue
        if resp.status_code >= 500:
            last_error = ScorerProtocolError(f"{url} returned {resp.status_code}")
            logger.warning("scorer returned %d (attempt %d)", resp.status_code, attempt + 1)
            continue
        if resp.status_code != 200:
            raise ScorerProtocolError(f"{url} returned {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise ScorerProtocolError(f"{url} returned non-JSON body: {exc}") from None
    raise ScorerProtocolError(f"{url} unreachable after {binding.retries + 1} attempts: {last_error}")
