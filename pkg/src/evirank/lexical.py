"""First-stage lexical retrieval: tokenizer, inverted index, Okapi BM25.

Scoring uses the Robertson-Sparck-Jones IDF with +0.5 smoothing, floored at
0 so terms in more than half the corpus never contribute negatively.  Each
query-token occurrence contributes (a duplicated query term counts twice).
Defaults k1=0.9, b=0.4.
"""
from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Claim, Corpus, Document, abstract_text, document_text
from .errors import DataError
from .ranking import RankedList, rank_candidates

_TOKEN_RE = re.compile(r"[a-z0-9]+")

INDEX_FORMAT = "evirank.index"
INDEX_VERSION = 1

DEFAULT_K1 = 0.9
DEFAULT_B = 0.4


def tokenize(text: str, stopwords: frozenset[str] = frozenset()) -> list[str]:
    """Lowercase, split on any non-alphanumeric run, drop empties.  No stemming."""
    tokens = _TOKEN_RE.findall(text.lower())
    if stopwords:
        tokens = [t for t in tokens if t not in stopwords]
    return tokens


def field_text(doc: Document, fields: str) -> str:
    if fields == "title_abstract":
        return document_text(doc)
    if fields == "abstract":
        return abstract_text(doc)
    raise DataError(f"unknown index fields mode: {fields!r}")


@dataclass(frozen=True)
class InvertedIndex:
    """Immutable term -> postings map; safe for concurrent queries."""

    postings: dict[str, tuple[tuple[int, int], ...]]  # term -> ((doc_id, tf), ...) sorted by doc_id
    doc_lengths: dict[int, int]
    fields: str = "title_abstract"
    stopwords: frozenset[str] = field(default_factory=frozenset)

    @property
    def doc_count(self) -> int:
        return len(self.doc_lengths)

    @property
    def avg_doc_len(self) -> float:
        if not self.doc_lengths:
            return 0.0
        return sum(self.doc_lengths.values()) / len(self.doc_lengths)

    def idf(self, term: str) -> float:
        """RSJ IDF with +0.5 smoothing, floored at 0."""
        df = len(self.postings.get(term, ()))
        if df == 0:
            return 0.0
        n = self.doc_count
        return max(0.0, math.log((n - df + 0.5) / (df + 0.5)))

    def validate(self) -> None:
        totals: Counter[int] = Counter()
        for term, plist in self.postings.items():
            prev = None
            for doc_id, tf in plist:
                if prev is not None and doc_id <= prev:
                    raise DataError(f"postings for {term!r} not sorted by doc_id")
                prev = doc_id
                totals[doc_id] += tf
        for doc_id, length in self.doc_lengths.items():
            if totals.get(doc_id, 0) != length:
                raise DataError(f"doc {doc_id}: stored length {length} != sum of term frequencies")


def build_index(
    corpus: Corpus,
    fields: str = "title_abstract",
    stopwords: frozenset[str] = frozenset(),
) -> InvertedIndex:
    """Index every document's field_text; deterministic for a given corpus."""
    postings: dict[str, list[tuple[int, int]]] = {}
    doc_lengths: dict[int, int] = {}
    for doc_id in sorted(corpus.documents):
        tokens = tokenize(field_text(corpus.documents[doc_id], fields), stopwords)
        doc_lengths[doc_id] = len(tokens)
        for term, tf in sorted(Counter(tokens).items()):
            postings.setdefault(term, []).append((doc_id, tf))
    frozen = {term: tuple(plist) for term, plist in postings.items()}
    return InvertedIndex(postings=frozen, doc_lengths=doc_lengths, fields=fields, stopwords=stopwords)


def bm25_search(
    index: InvertedIndex,
    claim: Claim,
    k: int,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
    pad: bool = False,
) -> RankedList:
    """Top-k documents by Okapi BM25.

    Only documents with a positive score are returned unless pad=True, which
    fills remaining slots with zero-score documents in ascending doc_id order.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    scores = _accumulate_scores(index, claim.text, k1, b)
    positive = [(d, s) for d, s in scores.items() if s > 0.0]
    ranked = rank_candidates(claim.claim_id, positive, k)
    if pad and len(ranked.entries) < k:
        present = set(ranked.doc_ids())
        fill = [(d, 0.0) for d in sorted(index.doc_lengths) if d not in present]
        ranked = rank_candidates(claim.claim_id, positive + fill[: k - len(ranked.entries)], k)
    return ranked


def _accumulate_scores(index: InvertedIndex, query: str, k1: float, b: float) -> dict[int, float]:
    scores: dict[int, float] = {}
    avgdl = index.avg_doc_len
    if avgdl == 0.0:
        return scores
    for term, qtf in sorted(Counter(tokenize(query, index.stopwords)).items()):
        idf = index.idf(term)
        if idf == 0.0:
            continue
        for doc_id, tf in index.postings[term]:
            norm = k1 * (1.0 - b + b * index.doc_lengths[doc_id] / avgdl)
            scores[doc_id] = scores.get(doc_id, 0.0) + qtf * idf * (tf * (k1 + 1.0)) / (tf + norm)
    return scores


def save_index(index: InvertedIndex, path: str | Path) -> bytes:
    """Serialize to a line-delimited file with a versioned header; byte-stable."""
    data = index_to_bytes(index)
    Path(path).write_bytes(data)
    return data


def index_to_bytes(index: InvertedIndex) -> bytes:
    header = {
        "format": INDEX_FORMAT,
        "version": INDEX_VERSION,
        "doc_count": index.doc_count,
        "fields": index.fields,
        "stopwords": sorted(index.stopwords),
    }
    lines = [json.dumps(header, sort_keys=True, separators=(",", ":"))]
    lengths = {str(d): n for d, n in sorted(index.doc_lengths.items())}
    lines.append(json.dumps({"lengths": lengths}, sort_keys=True, separators=(",", ":")))
    for term in sorted(index.postings):
        plist = [[d, tf] for d, tf in index.postings[term]]
        lines.append(json.dumps({"t": term, "p": plist}, sort_keys=True, separators=(",", ":")))
    return ("\n".join(lines) + "\n").encode("utf-8")


def load_index(path: str | Path) -> InvertedIndex:
    path = Path(path)
    if not path.exists():
        raise DataError(f"index file not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if len(lines) < 2:
        raise DataError(f"{path}: truncated index file")
    try:
        header = json.loads(lines[0])
        if header.get("format") != INDEX_FORMAT:
            raise DataError(f"{path}: not an index file")
        if header.get("version") != INDEX_VERSION:
            raise DataError(f"{path}: unsupported index version {header.get('version')}")
        lengths_raw = json.loads(lines[1])["lengths"]
        doc_lengths = {int(d): int(n) for d, n in lengths_raw.items()}
        postings: dict[str, tuple[tuple[int, int], ...]] = {}
        for line in lines[2:]:
            if not line.strip():
                continue
            rec = json.loads(line)
            postings[rec["t"]] = tuple((int(d), int(tf)) for d, tf in rec["p"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: corrupt index file: {exc}") from None
    index = InvertedIndex(
        postings=postings,
        doc_lengths=doc_lengths,
        fields=header.get("fields", "title_abstract"),
        stopwords=frozenset(header.get("stopwords", [])),
    )
    if index.doc_count != header.get("doc_count"):
        raise DataError(f"{path}: header doc_count mismatch")
    return index
