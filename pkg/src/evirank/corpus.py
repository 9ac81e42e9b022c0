"""Claims, documents, and gold evidence in the SciFact-family wire formats.

Corpus file: one JSON object per line with {doc_id: int, title: str,
abstract: [str]}.  Claims file: one JSON object per line with
{id: int, claim: str, evidence: {doc_id: [{label: str, sentences: [int]}]}}.
A loaded corpus is immutable and safe to share across threads.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError

logger = logging.getLogger(__name__)

SUPPORT = "SUPPORT"
REFUTE = "REFUTE"
NEI = "NEI"

# Public SciFact data spells the refuting label CONTRADICT; both spellings
# are accepted on input and normalized to REFUTE.
_LABEL_ALIASES = {
    "SUPPORT": SUPPORT,
    "SUPPORTS": SUPPORT,
    "REFUTE": REFUTE,
    "REFUTES": REFUTE,
    "CONTRADICT": REFUTE,
}

# Output spelling per the SciFact file convention.
SCIFACT_LABELS = {SUPPORT: "SUPPORT", REFUTE: "CONTRADICT"}


def normalize_label(raw: str) -> str:
    try:
        return _LABEL_ALIASES[raw.strip().upper()]
    except KeyError:
        raise DataError(f"unknown evidence label: {raw!r}") from None


@dataclass(frozen=True)
class Document:
    doc_id: int
    title: str
    abstract: tuple[str, ...]

    def validate(self) -> None:
        if not self.abstract:
            raise DataError(f"doc {self.doc_id}: empty abstract")
        for i, sent in enumerate(self.abstract):
            if not sent.strip():
                raise DataError(f"doc {self.doc_id}: blank abstract sentence at index {i}")


@dataclass(frozen=True)
class Claim:
    claim_id: int
    text: str

    def validate(self) -> None:
        if not self.text.strip():
            raise DataError(f"claim {self.claim_id}: empty text")


@dataclass(frozen=True)
class EvidenceAnnotation:
    """Document-level gold judgment; sentence indices are carried as opaque payload."""

    claim_id: int
    doc_id: int
    label: str
    sentences: tuple[int, ...] = ()

    def validate(self) -> None:
        if self.label not in (SUPPORT, REFUTE):
            raise DataError(
                f"claim {self.claim_id} doc {self.doc_id}: gold label must be "
                f"SUPPORT or REFUTE, got {self.label!r}"
            )


@dataclass(frozen=True)
class Corpus:
    documents: dict[int, Document]
    source: str = ""

    def __len__(self) -> int:
        return len(self.documents)

    def __contains__(self, doc_id: int) -> bool:
        return doc_id in self.documents

    def __iter__(self):
        return iter(sorted(self.documents))

    def get(self, doc_id: int) -> Document:
        try:
            return self.documents[doc_id]
        except KeyError:
            raise DataError(f"doc_id {doc_id} not found in corpus {self.source or '<memory>'}") from None


def document_text(doc: Document) -> str:
    """Title then abstract sentences, single-space separated.  Pure and deterministic."""
    parts = [doc.title] if doc.title else []
    parts.extend(doc.abstract)
    return " ".join(parts)


def abstract_text(doc: Document) -> str:
    return " ".join(doc.abstract)


def load_corpus(path: str | Path, strict: bool = True) -> Corpus:
    """Parse a corpus file; invalid lines abort in strict mode, otherwise are skipped.

    Duplicate doc_ids always abort: silently dropping a document would corrupt
    every downstream statistic.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"corpus file not found: {path}")
    documents: dict[int, Document] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = _parse_document(line)
            doc.validate()
        except DataError as exc:
            if strict:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            logger.warning("%s:%d: skipping invalid document: %s", path, lineno, exc)
            continue
        if doc.doc_id in documents:
            raise DataError(f"{path}:{lineno}: duplicate doc_id {doc.doc_id}")
        documents[doc.doc_id] = doc
    return Corpus(documents=documents, source=str(path))


def _parse_document(line: str) -> Document:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed JSON: {exc}") from None
    try:
        return Document(
            doc_id=int(raw["doc_id"]),
            title=str(raw.get("title", "")),
            abstract=tuple(str(s) for s in raw["abstract"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"bad document record: {exc}") from None


ClaimRecord = tuple[Claim, list[EvidenceAnnotation]]


def load_claims(
    path: str | Path,
    corpus: Corpus | None = None,
    strict: bool = True,
) -> list[ClaimRecord]:
    """Parse a claims file into (Claim, annotations) pairs.

    The per-document label is derived from the evidence map.  Evidence values
    may be a list of {label, sentences} objects or a single object (the
    leaderboard export shape).  With a corpus and strict=True, annotations
    citing unknown doc_ids abort the load.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"claims file not found: {path}")
    records: list[ClaimRecord] = []
    seen_ids: set[int] = set()
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            claim, annotations = _parse_claim(line)
            claim.validate()
            for ann in annotations:
                ann.validate()
        except DataError as exc:
            if strict:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            logger.warning("%s:%d: skipping invalid claim: %s", path, lineno, exc)
            continue
        if claim.claim_id in seen_ids:
            raise DataError(f"{path}:{lineno}: duplicate claim id {claim.claim_id}")
        seen_ids.add(claim.claim_id)
        if corpus is not None:
            for ann in annotations:
                if ann.doc_id not in corpus:
                    msg = f"{path}:{lineno}: evidence doc_id {ann.doc_id} not in corpus"
                    if strict:
                        raise DataError(msg)
                    logger.warning("%s (kept; lenient mode)", msg)
        records.append((claim, annotations))
    return records


def _parse_claim(line: str) -> ClaimRecord:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed JSON: {exc}") from None
    try:
        claim = Claim(claim_id=int(raw["id"]), text=str(raw["claim"]))
        evidence = raw.get("evidence") or {}
        if not isinstance(evidence, dict):
            raise DataError("evidence must be a map of doc_id to annotations")
        annotations = []
        for doc_key, entries in sorted(evidence.items(), key=lambda kv: int(kv[0])):
            doc_id = int(doc_key)
            if isinstance(entries, dict):
                entries = [entries]
            labels = {normalize_label(e["label"]) for e in entries}
            if len(labels) > 1:
                raise DataError(f"doc {doc_id} annotated with conflicting labels {sorted(labels)}")
            sentences: list[int] = []
            for e in entries:
                sentences.extend(int(s) for s in e.get("sentences", []))
            annotations.append(
                EvidenceAnnotation(
                    claim_id=claim.claim_id,
                    doc_id=doc_id,
                    label=labels.pop(),
                    sentences=tuple(sentences),
                )
            )
        return claim, annotations
    except DataError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"bad claim record: {exc}") from None


def gold_by_claim(records: list[ClaimRecord]) -> dict[int, dict[int, str]]:
    """claim_id -> {doc_id -> gold label} for every annotated pair."""
    gold: dict[int, dict[int, str]] = {}
    for claim, annotations in records:
        gold[claim.claim_id] = {ann.doc_id: ann.label for ann in annotations}
    return gold


def corpus_to_lines(corpus: Corpus) -> list[str]:
    lines = []
    for doc_id in sorted(corpus.documents):
        doc = corpus.documents[doc_id]
        lines.append(
            json.dumps(
                {"doc_id": doc.doc_id, "title": doc.title, "abstract": list(doc.abstract)},
                sort_keys=True,
            )
        )
    return lines


def claims_to_lines(records: list[ClaimRecord]) -> list[str]:
    lines = []
    for claim, annotations in records:
        evidence: dict[str, list] = {}
        for ann in annotations:
            evidence[str(ann.doc_id)] = [
                {"label": SCIFACT_LABELS[ann.label], "sentences": list(ann.sentences)}
            ]
        lines.append(
            json.dumps({"id": claim.claim_id, "claim": claim.text, "evidence": evidence}, sort_keys=True)
        )
    return lines


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    Path(path).write_text("\n".join(corpus_to_lines(corpus)) + "\n", encoding="utf-8")


def write_claims(records: list[ClaimRecord], path: str | Path) -> None:
    Path(path).write_text("\n".join(claims_to_lines(records)) + "\n", encoding="utf-8")
