"""Pipeline configuration: one flat JSON document plus CLI-flag overrides.

Precedence: flag > file > default.  Relative paths in a config file resolve
against the file's directory, so a bundle of data plus config is relocatable;
flag-supplied and default paths resolve against the working directory.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError

DEFAULT_K_LIST = [1, 3, 5, 10, 20, 50]


@dataclass
class PipelineConfig:
    corpus: str = "corpus.jsonl"
    claims: str = "claims.jsonl"
    workdir: str = "out"
    # artifact paths; None means derive from workdir
    index: str | None = None
    bm25_run: str | None = None
    combo_run: str | None = None
    reranked_run: str | None = None
    verifier_train: str | None = None
    reranker_train: str | None = None
    model: str | None = None
    metrics: str | None = None
    predictions: str | None = None  # external neural predictions, optional
    # scorer binding
    scorer: str = "cache"
    score_cache: str | None = None
    endpoint: str | None = None
    batch_size: int = 32
    timeout: float = 30.0
    # BM25
    k1: float = 0.9
    b: float = 0.4
    index_fields: str = "title_abstract"
    stopwords: list[str] = field(default_factory=list)
    pad: bool = False
    # fusion / supervision / training
    alpha: float = 0.5
    k: int = 100
    rerank_k: int = 100
    k_list: list[int] = field(default_factory=lambda: list(DEFAULT_K_LIST))
    n_negatives: int = 10
    pool_depth: int = 100
    seed: int = 0
    train_depth: int = 20
    verify_depth: int = 3
    epochs: int = 500
    learning_rate: float = 0.5
    strict: bool = True
    tag: str = "evirank"

    _base: Path = field(default_factory=Path.cwd, repr=False)

    _DERIVED = {
        "index": "index.jsonl",
        "bm25_run": "bm25.run",
        "combo_run": "combo.run",
        "reranked_run": "reranked.run",
        "verifier_train": "verifier_train.jsonl",
        "reranker_train": "reranker_train.jsonl",
        "model": "reranker_model.txt",
        "metrics": "metrics.json",
    }

    def validate(self) -> None:
        if not (0.0 <= self.alpha <= 1.0):
            raise ConfigError(f"alpha={self.alpha} outside [0, 1]")
        if self.scorer not in ("cache", "service"):
            raise ConfigError(f"scorer must be 'cache' or 'service', got {self.scorer!r}")
        if self.k < 1 or self.rerank_k < 1:
            raise ConfigError("k and rerank_k must be >= 1")
        if not self.k_list or any(k < 1 for k in self.k_list):
            raise ConfigError("k_list must contain integers >= 1")
        if self.n_negatives < 1 or self.pool_depth < self.n_negatives:
            raise ConfigError("need 1 <= n_negatives <= pool_depth")
        if self.index_fields not in ("title_abstract", "abstract"):
            raise ConfigError(f"index_fields must be title_abstract or abstract, got {self.index_fields!r}")

    def path(self, name: str) -> Path:
        """Resolve a path-valued config key, deriving artifact paths from workdir."""
        value = getattr(self, name)
        if value is None:
            if name not in self._DERIVED:
                raise ConfigError(f"config key {name!r} is not set")
            return self._resolve(self.workdir) / self._DERIVED[name]
        return self._resolve(value)

    def _resolve(self, value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else (self._base / p)

    def require_inputs(self, *names: str) -> None:
        """Fail fast (before any work) if a required input file is absent."""
        missing = [f"{name} ({self.path(name)})" for name in names if not self.path(name).exists()]
        if missing:
            raise ConfigError("missing input file(s): " + ", ".join(missing))


_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig) if not f.name.startswith("_")}


def load_config(config_path: str | Path | None, overrides: dict | None = None) -> PipelineConfig:
    """Merge defaults, config file, and overrides (in increasing precedence)."""
    cfg = PipelineConfig()
    if config_path is not None:
        config_path = Path(config_path)
        if not config_path.exists():
            raise ConfigError(f"config file not found: {config_path}")
        try:
            raw = json.loads(config_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{config_path}: invalid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{config_path}: config must be a flat JSON object")
        _apply(cfg, raw, source=str(config_path))
        cfg._base = config_path.resolve().parent
    for key, value in (overrides or {}).items():
        if value is not None:
            _apply(cfg, {key: value}, source="command line", absolute_paths=True)
    cfg.validate()
    return cfg


_PATH_KEYS = {
    "corpus", "claims", "workdir", "index", "bm25_run", "combo_run", "reranked_run",
    "verifier_train", "reranker_train", "model", "metrics", "predictions", "score_cache",
}


def _apply(cfg: PipelineConfig, values: dict, source: str, absolute_paths: bool = False) -> None:
    for key, value in values.items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{source}: unknown config key {key!r}")
        if absolute_paths and key in _PATH_KEYS and value is not None:
            value = str(Path(value).resolve())
        try:
            setattr(cfg, key, _coerce(key, value))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{source}: bad value for {key!r}: {exc}") from None


def _coerce(key: str, value):
    if key in ("stopwords", "k_list"):
        if not isinstance(value, list):
            raise ValueError(f"expected a list, got {type(value).__name__}")
        return [int(v) for v in value] if key == "k_list" else [str(v) for v in value]
    if key in ("strict", "pad"):
        if isinstance(value, bool):
            return value
        if isinstance(value, str):
            if value.lower() in ("true", "1", "yes"):
                return True
            if value.lower() in ("false", "0", "no"):
                return False
        raise ValueError(f"expected a boolean, got {value!r}")
    if key in ("batch_size", "k", "rerank_k", "n_negatives", "pool_depth", "seed",
               "train_depth", "verify_depth", "epochs"):
        return int(value)
    if key in ("timeout", "k1", "b", "alpha", "learning_rate"):
        return float(value)
    if value is None:
        return None
    return str(value)
