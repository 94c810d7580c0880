"""HTTP inference service: colorization plus rollout over a read-only
checkpoint, and static hosting for the browser workspace.

Endpoints:
    POST /api/colorize   colorize a base64 PNG with a hint list
    GET  /api/model      loaded config, parameter count, GFLOPs
    GET  /api/health     liveness and uptime

Hint coordinates arrive in original-image pixel space; scaling to the
model grid happens here. Errors: 400 malformed request or out-of-bounds
hint, 413 oversized image, 503 no checkpoint loaded.
"""

from __future__ import annotations

import base64
import binascii
import json
import time

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .dataio import decode_png_bytes, encode_png_bytes, load_checkpoint
from .hints import hints_from_json
from .infer import colorize
from .model import Colorizer, count_flops

DEFAULT_PORT = 8290
DEFAULT_MAX_IMAGE_DIM = 4096


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"detail": message})


def create_app(checkpoint_path=None, max_image_dim: int = DEFAULT_MAX_IMAGE_DIM,
               static_dir=None) -> FastAPI:
    """Build the application; loads the checkpoint eagerly when given."""
    app = FastAPI(title="hint colorization service")
    app.state.model = None
    app.state.checkpoint_path = None
    app.state.started = time.monotonic()
    app.state.max_image_dim = max_image_dim

    if checkpoint_path is not None:
        params, config = load_checkpoint(checkpoint_path)
        app.state.model = Colorizer(params, config)
        app.state.checkpoint_path = str(checkpoint_path)

    @app.exception_handler(RequestValidationError)
    async def _validation_handler(request: Request, exc: RequestValidationError):
        return _error(400, f"malformed request: {exc.errors()[:3]}")

    @app.get("/api/health")
    def health():
        return {"status": "ok", "uptime_s": int(time.monotonic() - app.state.started)}

    @app.get("/api/model")
    def model_info():
        model = app.state.model
        if model is None:
            return _error(503, "no checkpoint loaded")
        return {
            "config": model.config.to_dict(),
            "parameter_count": model.parameter_count(),
            "gflops": count_flops(model.config),
            "checkpoint_path": app.state.checkpoint_path,
        }

    @app.post("/api/colorize")
    async def colorize_endpoint(request: Request):
        model = app.state.model
        if model is None:
            return _error(503, "no checkpoint loaded")
        try:
            body = await request.json()
        except Exception:
            return _error(400, "request body is not valid JSON")
        if not isinstance(body, dict):
            return _error(400, "request body must be a JSON object")
        if "image" not in body or not isinstance(body["image"], str):
            return _error(400, "field 'image' must be a base64 PNG string")
        try:
            blob = base64.b64decode(body["image"], validate=True)
        except (binascii.Error, ValueError):
            return _error(400, "field 'image' is not valid base64")
        try:
            image = decode_png_bytes(blob)
        except ValueError as exc:
            return _error(400, f"field 'image': {exc}")
        if max(image.width, image.height) > app.state.max_image_dim:
            return _error(
                413,
                f"image {image.width}x{image.height} exceeds the "
                f"{app.state.max_image_dim} pixel limit per side",
            )
        raw_hints = body.get("hints", [])
        if not isinstance(raw_hints, list):
            return _error(400, "field 'hints' must be an array")
        try:
            hints = hints_from_json(json.dumps(raw_hints))
        except (ValueError, TypeError) as exc:
            return _error(400, f"field 'hints': {exc}")

        return_rollout = bool(body.get("return_rollout", False))
        rollout_hint = None
        if return_rollout:
            idx = body.get("rollout_hint_index", -1)
            if not isinstance(idx, int) or isinstance(idx, bool):
                return _error(400, "field 'rollout_hint_index' must be an integer")
            rollout_hint = idx
        try:
            result = colorize(model, image, hints, rollout_hint=rollout_hint)
        except ValueError as exc:
            return _error(400, str(exc))

        payload = {
            "image": base64.b64encode(encode_png_bytes(result.image)).decode("ascii"),
            "latency_ms": result.latency_ms,
            "rollout": None,
        }
        if result.rollout_grid is not None:
            grid = result.rollout_grid
            payload["rollout"] = {
                "height": grid.shape[0],
                "width": grid.shape[1],
                "values": grid.tolist(),
            }
        return payload

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    return app


def run(checkpoint_path, port: int = DEFAULT_PORT,
        max_image_dim: int = DEFAULT_MAX_IMAGE_DIM, static_dir=None,
        host: str = "127.0.0.1") -> None:
    """Blocking entry point used by the CLI serve subcommand."""
    import uvicorn

    app = create_app(checkpoint_path, max_image_dim=max_image_dim,
                     static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
