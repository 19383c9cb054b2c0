"""HTTP inference endpoint for the interactive prompting loop.

Images are uploaded once and referenced by id; each predict call runs the
model on a stored image with a JSON prompt and returns the matte as a
base64 16-bit PNG. The image store is in-memory with an LRU cap; the
checkpoint is immutable once loaded.
"""

from __future__ import annotations

import base64
import threading
import time
import uuid
from collections import OrderedDict
from contextlib import asynccontextmanager

import cv2
import numpy as np
from fastapi import FastAPI, HTTPException, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .checkpoint import checkpoint_hash
from .model import MattingModel, load_model
from .prompts import Prompt, PromptError

MAX_UPLOAD_BYTES = 16 * 1024 * 1024
IMAGE_STORE_CAP = 64
PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


class ImageStore:
    """Thread-safe in-memory LRU store of decoded images."""

    def __init__(self, cap: int = IMAGE_STORE_CAP):
        self._cap = cap
        self._items: OrderedDict[str, np.ndarray] = OrderedDict()
        self._lock = threading.Lock()

    def put(self, image: np.ndarray) -> str:
        image_id = uuid.uuid4().hex
        with self._lock:
            self._items[image_id] = image
            while len(self._items) > self._cap:
                self._items.popitem(last=False)
        return image_id

    def get(self, image_id: str) -> np.ndarray | None:
        with self._lock:
            image = self._items.get(image_id)
            if image is not None:
                self._items.move_to_end(image_id)
            return image


class PredictRequest(BaseModel):
    image_id: str
    prompt: dict


def _encode_matte_png(matte: np.ndarray) -> bytes:
    u16 = np.round(np.clip(matte, 0.0, 1.0) * 65535.0).astype(np.uint16)
    ok, buf = cv2.imencode(".png", u16)
    if not ok:
        raise RuntimeError("failed to encode matte PNG")
    return buf.tobytes()


def create_app(
    checkpoint_path: str | None = None,
    model: MattingModel | None = None,
    cors_origins: list[str] | None = None,
    max_upload_bytes: int = MAX_UPLOAD_BYTES,
) -> FastAPI:
    """Build the service app. The checkpoint loads during lifespan startup;
    health reports 503 until it has finished."""

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if app.state.model is None and checkpoint_path is not None:
            app.state.model, _ = load_model(checkpoint_path)
            app.state.checkpoint_hash = checkpoint_hash(checkpoint_path)
        yield

    app = FastAPI(lifespan=lifespan)
    app.state.model = model
    app.state.checkpoint_hash = (
        checkpoint_hash(checkpoint_path) if (model is not None and checkpoint_path) else None
    )
    app.state.images = ImageStore()

    if cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(cors_origins),
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.get("/api/v1/health")
    def health():
        if app.state.model is None:
            raise HTTPException(status_code=503, detail="checkpoint not loaded")
        return {"status": "ok", "checkpoint_hash": app.state.checkpoint_hash}

    @app.post("/api/v1/images")
    async def upload_image(file: UploadFile):
        data = await file.read()
        if len(data) > max_upload_bytes:
            raise HTTPException(status_code=413, detail="file exceeds upload limit")
        if not data.startswith(PNG_MAGIC):
            raise HTTPException(status_code=400, detail="not a PNG file")
        raw = cv2.imdecode(np.frombuffer(data, np.uint8), cv2.IMREAD_COLOR)
        if raw is None:
            raise HTTPException(status_code=400, detail="PNG could not be decoded")
        image = cv2.cvtColor(raw, cv2.COLOR_BGR2RGB).astype(np.float32) / 255.0
        return {"image_id": app.state.images.put(image)}

    @app.post("/api/v1/predict")
    def predict(request: PredictRequest):
        if app.state.model is None:
            raise HTTPException(status_code=503, detail="checkpoint not loaded")
        image = app.state.images.get(request.image_id)
        if image is None:
            raise HTTPException(status_code=404, detail=f"unknown image_id: {request.image_id}")
        try:
            prompt = Prompt.from_wire(request.prompt)
        except (PromptError, KeyError, TypeError, ValueError) as exc:
            raise HTTPException(
                status_code=422,
                detail=[{"loc": ["body", "prompt"], "msg": str(exc)}],
            ) from exc
        if prompt.empty:
            raise HTTPException(
                status_code=422,
                detail=[{"loc": ["body", "prompt"], "msg": "prompt must contain at least one element"}],
            )
        start = time.perf_counter()
        matte = app.state.model.predict(image, prompt)
        latency_ms = (time.perf_counter() - start) * 1000.0
        cfg = app.state.model.cfg
        return {
            "matte": base64.b64encode(_encode_matte_png(matte)).decode("ascii"),
            "latency_ms": latency_ms,
            "model_info": {
                "checkpoint_hash": app.state.checkpoint_hash,
                "config": {
                    "input_size": cfg.input_size,
                    "embed_dim": cfg.embed_dim,
                    "decoder_layers": cfg.decoder_layers,
                    "sigma": cfg.sigma,
                },
            },
        }

    return app
