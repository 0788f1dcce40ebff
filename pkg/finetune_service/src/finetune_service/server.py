"""HTTP serving layer: POST /embed over a trained encoder.

Request body is {"texts": [...]} and the response is
{"embeddings": [[...], ...], "dim": n} with one row per input text, in
request order.  Validation is done by hand so malformed bodies get a
plain 400 with a message and oversized batches get a 413.
"""
from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .encoder import CharEncoder, load_encoder

DEFAULT_MAX_BATCH = 256


def _bad_request(message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=400)


def create_app(
    model: CharEncoder | str | Path,
    *,
    max_batch: int = DEFAULT_MAX_BATCH,
    normalize: bool = True,
) -> FastAPI:
    """Build the serving app around a loaded encoder or an artifact dir."""
    encoder = model if isinstance(model, CharEncoder) else load_encoder(model)
    encoder.eval()
    lock = threading.Lock()
    app = FastAPI()

    @app.post("/embed")
    async def embed(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _bad_request("request body must be valid JSON")
        if not isinstance(body, dict) or "texts" not in body:
            return _bad_request('request body must be an object with a "texts" field')
        texts = body["texts"]
        if not isinstance(texts, list) or not texts:
            return _bad_request('"texts" must be a non-empty list')
        if not all(isinstance(t, str) and t for t in texts):
            return _bad_request('"texts" entries must be non-empty strings')
        if len(texts) > max_batch:
            return JSONResponse(
                {"error": f"batch of {len(texts)} exceeds limit {max_batch}"},
                status_code=413,
            )
        with lock:
            vectors = encoder.encode(texts, normalize=normalize)
        return {"embeddings": vectors.tolist(), "dim": encoder.dim}

    return app
