"""Ranked candidate lists and TREC-style run file I/O.

Every ranking in the pipeline goes through rank_candidates so the tie rule
(descending score, then ascending doc_id) is identical everywhere.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import DataError


@dataclass(frozen=True)
class RankedEntry:
    doc_id: int
    score: float
    rank: int


@dataclass(frozen=True)
class RankedList:
    claim_id: int
    entries: tuple[RankedEntry, ...]

    def doc_ids(self) -> list[int]:
        return [e.doc_id for e in self.entries]

    def top(self, k: int) -> "RankedList":
        return RankedList(self.claim_id, self.entries[:k])

    def validate(self) -> None:
        seen: set[int] = set()
        prev_score = None
        for i, e in enumerate(self.entries):
            if e.rank != i + 1:
                raise DataError(f"claim {self.claim_id}: ranks not contiguous at position {i + 1}")
            if e.doc_id in seen:
                raise DataError(f"claim {self.claim_id}: duplicate doc_id {e.doc_id}")
            seen.add(e.doc_id)
            if prev_score is not None and e.score > prev_score:
                raise DataError(f"claim {self.claim_id}: score increases at rank {e.rank}")
            prev_score = e.score


def rank_candidates(claim_id: int, scored: list[tuple[int, float]], k: int | None = None) -> RankedList:
    """Order (doc_id, score) pairs by descending score, ties by ascending doc_id."""
    ordered = sorted(scored, key=lambda pair: (-pair[1], pair[0]))
    if k is not None:
        ordered = ordered[:k]
    entries = tuple(
        RankedEntry(doc_id=d, score=s, rank=i) for i, (d, s) in enumerate(ordered, start=1)
    )
    return RankedList(claim_id=claim_id, entries=entries)


def run_to_lines(lists: list[RankedList], tag: str) -> list[str]:
    lines = []
    for ranked in lists:
        for e in ranked.entries:
            lines.append(f"{ranked.claim_id} Q0 {e.doc_id} {e.rank} {e.score:.6f} {tag}")
    return lines


def write_run(lists: list[RankedList], path: str | Path, tag: str = "evirank") -> None:
    Path(path).write_text("\n".join(run_to_lines(lists, tag)) + "\n", encoding="utf-8")


def read_run(path: str | Path) -> dict[int, RankedList]:
    """Parse a TREC run file back into per-claim RankedLists (validated)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"run file not found: {path}")
    by_claim: dict[int, list[RankedEntry]] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 6 or parts[1] != "Q0":
            raise DataError(f"{path}:{lineno}: malformed run line")
        try:
            claim_id, doc_id, rank, score = int(parts[0]), int(parts[2]), int(parts[3]), float(parts[4])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
        by_claim.setdefault(claim_id, []).append(RankedEntry(doc_id=doc_id, score=score, rank=rank))
    lists = {}
    for claim_id, entries in by_claim.items():
        ranked = RankedList(claim_id=claim_id, entries=tuple(sorted(entries, key=lambda e: e.rank)))
        ranked.validate()
        lists[claim_id] = ranked
    return lists
