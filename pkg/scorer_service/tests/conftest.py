"""Test data is produced through the retrieval pipeline's public surfaces
only: the `evirank` CLI and its documented file formats (the sidecar never
imports the pipeline package)."""
import json
import subprocess
import sys
from dataclasses import dataclass
from pathlib import Path

import pytest

BUNDLE_SEEDS = (0, 1, 2)


def run_pipeline_cli(*argv: str) -> None:
    result = subprocess.run(["evirank", *argv], capture_output=True, text=True)
    if result.returncode != 0:
        raise RuntimeError(
            f"evirank {' '.join(argv)} failed ({result.returncode}):\n{result.stdout}{result.stderr}"
        )


@dataclass(frozen=True)
class Bundle:
    root: Path
    seed: int

    @property
    def corpus(self) -> Path:
        return self.root / "corpus.jsonl"

    @property
    def claims(self) -> Path:
        return self.root / "claims.jsonl"

    @property
    def config(self) -> Path:
        return self.root / "config.json"

    @property
    def work(self) -> Path:
        return self.root / "work"

    def claim_records(self) -> list[dict]:
        return [json.loads(line) for line in self.claims.read_text().splitlines()]


def make_bundle(root: Path, seed: int) -> Bundle:
    result = subprocess.run(
        [sys.executable, "-m", "evirank.fixtures", "--out", str(root), "--seed", str(seed)],
        capture_output=True, text=True,
    )
    if result.returncode != 0:
        raise RuntimeError(f"fixture generation failed:\n{result.stdout}{result.stderr}")
    return Bundle(root=root, seed=seed)


def build_train_files(bundle: Bundle, n_negatives: tuple[int, ...]) -> dict[int, Path]:
    """Index/retrieve/fuse/build-train over the bundle's first four claims
    (the last two are held out for evaluation); returns verifier train file per N."""
    records = bundle.claim_records()
    held_out = {records[4]["id"], records[5]["id"]}
    train_claims = bundle.root / "claims_train.jsonl"
    train_claims.write_text(
        "\n".join(json.dumps(r) for r in records if r["id"] not in held_out) + "\n",
        encoding="utf-8",
    )
    base = ["--config", str(bundle.config), "--workdir", str(bundle.work)]
    run_pipeline_cli("index", *base)
    files = {}
    for n in n_negatives:
        out = bundle.work / f"verifier_train_n{n}.jsonl"
        run_pipeline_cli("retrieve", *base, "--claims", str(train_claims), "--k", "20")
        run_pipeline_cli("fuse", *base, "--claims", str(train_claims))
        run_pipeline_cli(
            "build-train", *base, "--claims", str(train_claims),
            "--n-negatives", str(n), "--pool-depth", "20",
            "--verifier-train", str(out),
        )
        files[n] = out
    return files


@pytest.fixture(scope="session")
def bundle(tmp_path_factory) -> Bundle:
    return make_bundle(tmp_path_factory.mktemp("bundle") / "fixture", seed=0)


@pytest.fixture(scope="session")
def pipeline_bundle(bundle) -> Bundle:
    """Bundle with the full-claims pipeline artifacts built (run + train files)."""
    base = ["--config", str(bundle.config), "--workdir", str(bundle.work)]
    run_pipeline_cli("index", *base)
    run_pipeline_cli("retrieve", *base)
    run_pipeline_cli("fuse", *base)
    run_pipeline_cli("build-train", *base)
    return bundle
