"""FastAPI app implementing the batch scoring wire protocol.

POST /v1/relevance  {"pairs": [{"claim": str, "doc": str}]} -> {"logits": [float]}
POST /v1/verify     same request shape -> {"probs": [[p_support, p_refute, p_nei]]}
GET  /health        -> model identifiers once ready

Responses are positionally aligned with the request (length asserted before
returning).  Errors: 400 malformed body, 413 oversized batch, 503 before the
models are loaded.  Probability triples are softmax outputs renormalized to
sum to exactly 1.0.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .models import HashedPairModel, ModelError, load_model

logger = logging.getLogger(__name__)

MAX_BATCH_DEFAULT = 64


@dataclass
class ServiceConfig:
    relevance_model: str = "untrained:0"
    verify_model: str = "untrained:0"
    device: str = field(default_factory=lambda: os.environ.get("SCORER_DEVICE", "cpu"))
    max_batch: int = MAX_BATCH_DEFAULT
    port: int = field(default_factory=lambda: int(os.environ.get("SCORER_PORT", "8191")))

    def __post_init__(self) -> None:
        if self.max_batch < 1:
            raise ValueError(f"max_batch must be >= 1, got {self.max_batch}")


class Pair(BaseModel):
    claim: str
    doc: str


class PairBatch(BaseModel):
    pairs: list[Pair]


def create_app(config: ServiceConfig, defer_load: bool = False) -> FastAPI:
    """Build the app; models load immediately unless defer_load (tests of the
    not-ready path).  A model that fails to load prevents startup."""
    app = FastAPI(title="scorer-service")
    app.state.config = config
    app.state.relevance: HashedPairModel | None = None
    app.state.verify: HashedPairModel | None = None

    def load_models() -> None:
        app.state.relevance = load_model(config.relevance_model, "relevance")
        app.state.verify = load_model(config.verify_model, "verify")
        logger.info(
            "models ready: relevance=%s verify=%s device=%s",
            config.relevance_model, config.verify_model, config.device,
        )

    app.state.load_models = load_models
    if not defer_load:
        load_models()

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    def check_batch(batch: PairBatch) -> None:
        if app.state.relevance is None or app.state.verify is None:
            raise HTTPException(status_code=503, detail="models not loaded yet")
        if len(batch.pairs) > config.max_batch:
            raise HTTPException(
                status_code=413,
                detail=f"batch of {len(batch.pairs)} exceeds max_batch {config.max_batch}",
            )

    @app.post("/v1/relevance")
    def relevance(batch: PairBatch):
        check_batch(batch)
        logits = app.state.relevance.relevance_logits(
            [p.claim for p in batch.pairs], [p.doc for p in batch.pairs]
        )
        assert len(logits) == len(batch.pairs)
        return {"logits": logits}

    @app.post("/v1/verify")
    def verify(batch: PairBatch):
        check_batch(batch)
        probs = app.state.verify.label_probabilities(
            [p.claim for p in batch.pairs], [p.doc for p in batch.pairs]
        )
        assert len(probs) == len(batch.pairs)
        return {"probs": probs}

    @app.get("/health")
    def health():
        if app.state.relevance is None or app.state.verify is None:
            raise HTTPException(status_code=503, detail="models not loaded yet")
        return {
            "status": "ok",
            "relevance_model": config.relevance_model,
            "verify_model": config.verify_model,
            "max_batch": config.max_batch,
        }

    return app


def serve(config: ServiceConfig) -> None:
    """Load models (refusing to start on failure) and block serving requests."""
    import uvicorn

    try:
        app = create_app(config)
    except ModelError as exc:
        raise SystemExit(f"refusing to start: {exc}") from None
    uvicorn.run(app, host="0.0.0.0", port=config.port, log_level="warning")
