"""Readers for the pipeline's documented file formats.

The sidecar talks to the retrieval pipeline only through files and HTTP, so
it carries its own minimal parsers: corpus and claims JSONL, the two training
file layouts, and TREC run files for candidate lists.
"""
from __future__ import annotations

import json
from pathlib import Path


class DataFileError(Exception):
    pass


def _read_jsonl(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise DataFileError(f"file not found: {path}")
    records = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise DataFileError(f"{path}:{lineno}: invalid JSON: {exc}") from None
    return records


def load_document_texts(path: str | Path) -> dict[int, str]:
    """doc_id -> 'title + abstract' text, matching the pipeline's indexing unit."""
    texts = {}
    for rec in _read_jsonl(path):
        parts = ([rec["title"]] if rec.get("title") else []) + list(rec["abstract"])
        texts[int(rec["doc_id"])] = " ".join(parts)
    return texts


def load_claim_texts(path: str | Path) -> dict[int, str]:
    return {int(rec["id"]): str(rec["claim"]) for rec in _read_jsonl(path)}


def load_gold_pairs(path: str | Path) -> dict[tuple[int, int], str]:
    """(claim_id, doc_id) -> gold label from a claims file (CONTRADICT -> REFUTE)."""
    gold = {}
    for rec in _read_jsonl(path):
        claim_id = int(rec["id"])
        for doc_id, entries in (rec.get("evidence") or {}).items():
            if isinstance(entries, dict):
                entries = [entries]
            for entry in entries:
                label = str(entry["label"]).upper()
                gold[(claim_id, int(doc_id))] = "REFUTE" if label == "CONTRADICT" else label
    return gold


def load_verifier_train_file(path: str | Path) -> list[tuple[int, int, str]]:
    triples = []
    for rec in _read_jsonl(path):
        label = str(rec["label"])
        if label not in ("SUPPORT", "REFUTE", "NEI"):
            raise DataFileError(f"{path}: unknown label {label!r}")
        triples.append((int(rec["claim_id"]), int(rec["doc_id"]), label))
    if not triples:
        raise DataFileError(f"{path}: empty training file")
    return triples


def load_reranker_train_file(path: str | Path) -> list[tuple[int, int, float]]:
    examples = []
    for rec in _read_jsonl(path):
        target = float(rec["target"])
        if not (0.0 <= target <= 1.0):
            raise DataFileError(f"{path}: target {target} outside [0, 1]")
        examples.append((int(rec["claim_id"]), int(rec["doc_id"]), target))
    if not examples:
        raise DataFileError(f"{path}: empty training file")
    return examples


def load_run_pairs(path: str | Path) -> list[tuple[int, int]]:
    """(claim_id, doc_id) pairs from a TREC run file, in file order."""
    path = Path(path)
    if not path.exists():
        raise DataFileError(f"run file not found: {path}")
    pairs = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 6:
            raise DataFileError(f"{path}:{lineno}: malformed run line")
        pairs.append((int(parts[0]), int(parts[2])))
    return pairs
