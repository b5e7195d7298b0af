"""HTTP service for interactive pictogram authoring.

Serves vocabulary metadata, pictogram images, and ranked next-pictogram
predictions for an in-construction sentence. The model and vocabulary are
loaded once and treated as immutable; requests never mutate service state,
so any number of requests may run concurrently (inference is capped by a
bounded semaphore).
"""

from __future__ import annotations

import threading
import time
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import FileResponse, JSONResponse, RedirectResponse
from pydantic import BaseModel

from .errors import UnknownTokenError
from .evaluation import ModelScorer, rank_distribution
from .training import NUM_RESERVED, load_checkpoint
from .vocabulary import load_vocabulary


class PredictRequest(BaseModel):
    prefix: list[str] = []
    n: int = 9


class PredictionItem(BaseModel):
    token: str
    caption: str
    probability: float
    image_url: str | None = None


class PredictResponse(BaseModel):
    items: list[PredictionItem]
    model_id: str
    latency_ms: float


def create_app(
    checkpoint_dir,
    vocab_path,
    vocab_format: str = "jsonl",
    images_dir=None,
    image_base_url: str | None = None,
    cors_origins: tuple[str, ...] = (),
    max_concurrency: int = 4,
    lazy: bool = False,
) -> FastAPI:
    """Build the service app.

    Loading verifies that the checkpoint was built against the supplied
    vocabulary (content-hash comparison) and fails fast otherwise. With
    ``lazy=True`` loading happens at startup instead of construction and
    /health reports 503 until it completes.
    """
    def load(state) -> None:
        state.vocab = load_vocabulary(vocab_path, fmt=vocab_format)
        state.adapted = load_checkpoint(checkpoint_dir, vocab=state.vocab)
        state.scorer = ModelScorer(state.adapted)
        state.model_id = state.adapted.model_id()
        state.sequence_length = state.adapted.encoder_config.max_positions
        state.loaded_at = time.monotonic()
        state.ready = True

    lifespan = None
    if lazy:
        @asynccontextmanager
        async def lifespan(app_):
            load(app_.state)
            yield

    app = FastAPI(title="pictopred prediction service", docs_url=None, redoc_url=None,
                  lifespan=lifespan)
    if cors_origins:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(cors_origins),
            allow_methods=["*"],
            allow_headers=["*"],
        )

    state = app.state
    state.ready = False
    state.semaphore = threading.BoundedSemaphore(max_concurrency)
    if not lazy:
        load(state)

    def require_ready():
        if not state.ready:
            raise HTTPException(status_code=503, detail="model is still loading")

    @app.get("/health")
    def health():
        require_ready()
        return {
            "model_id": state.model_id,
            "vocab_size": len(state.adapted.table),
            "uptime": time.monotonic() - state.loaded_at,
        }

    @app.get("/vocabulary")
    def vocabulary(page: int = Query(0), size: int = Query(36)):
        require_ready()
        if page < 0 or size < 1:
            raise HTTPException(status_code=400, detail="page must be >= 0 and size >= 1")
        ids = state.vocab.ids
        window = ids[page * size : (page + 1) * size]
        items = []
        for pid in window:
            entry = state.vocab.entries[pid]
            items.append(
                {
                    "id": pid,
                    "captions": [kw.term for kw in entry.keywords],
                    "has_image": entry.image_ref is not None or images_dir is not None,
                }
            )
        return {"page": page, "size": size, "total": len(ids), "items": items}

    def image_url_for(token: str) -> str | None:
        if not token.isdigit():
            return None
        pid = int(token)
        if pid not in state.vocab.entries:
            return None
        entry = state.vocab.entries[pid]
        if images_dir is None and image_base_url is None and entry.image_ref is None:
            return None
        return f"/pictograms/{pid}/image"

    @app.post("/predict", response_model=PredictResponse)
    def predict(request: PredictRequest):
        require_ready()
        started = time.perf_counter()
        table = state.adapted.table
        if request.n < 1 or request.n > len(table):
            raise HTTPException(status_code=400, detail=f"n must be in 1..{len(table)}")
        if len(request.prefix) > state.sequence_length - 2:
            raise HTTPException(status_code=413, detail="prefix too long for the model")
        for token in request.prefix:
            if token not in table:
                raise HTTPException(status_code=422, detail=f"unknown token: {token}")
        with state.semaphore:
            dist = state.scorer.token_distribution(request.prefix)
        items = []
        for index in rank_distribution(dist):
            if index < NUM_RESERVED:
                continue
            token = table.token_at(int(index))
            entry = state.vocab.entries.get(int(token)) if token.isdigit() else None
            items.append(
                PredictionItem(
                    token=token,
                    caption=entry.caption if entry else token,
                    probability=float(dist[index]),
                    image_url=image_url_for(token),
                )
            )
            if len(items) == request.n:
                break
        return PredictResponse(
            items=items,
            model_id=state.model_id,
            latency_ms=(time.perf_counter() - started) * 1000.0,
        )

    @app.get("/pictograms/{pid}/image")
    def pictogram_image(pid: int):
        require_ready()
        entry = state.vocab.entries.get(pid)
        if entry is None:
            raise HTTPException(status_code=404, detail=f"unknown pictogram id {pid}")
        if images_dir is not None:
            path = Path(images_dir) / f"{pid}.png"
            if path.exists():
                return FileResponse(path, media_type="image/png")
            raise HTTPException(status_code=404, detail=f"no image for id {pid}")
        if image_base_url is not None:
            return RedirectResponse(f"{image_base_url.rstrip('/')}/{pid}", status_code=302)
        if entry.image_ref is not None:
            path = Path(entry.image_ref)
            if path.exists():
                return FileResponse(path, media_type="image/png")
        raise HTTPException(status_code=404, detail=f"no image for id {pid}")

    @app.get("/spec")
    def spec():
        return JSONResponse(app.openapi())

    return app
