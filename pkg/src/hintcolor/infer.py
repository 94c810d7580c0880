"""Full-resolution inference pipeline shared by the CLI and the HTTP
service, so both produce byte-identical results for identical inputs.

The model runs at its own resolution; the input L plane is downscaled for
the forward pass, the predicted chroma is upscaled back, and the output
keeps the original-resolution luminance untouched.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .colorspace import LabImage, RgbImage, denormalize_ab, lab_to_rgb, rgb_to_lab
from .dataio import resize_bilinear_array
from .hints import Hint, build_model_input, encode_hints
from .model import Colorizer
from .rollout import attention_rollout, hint_token_index


@dataclass
class ColorizeResult:
    image: RgbImage
    latency_ms: int
    rollout_grid: np.ndarray | None = None


def round_half_up(value: float) -> int:
    """Scaling rule for hint coordinates: .5 always rounds toward +inf."""
    return int(math.floor(value + 0.5))


def scale_hint(hint: Hint, src_w: int, src_h: int, dst: int) -> Hint:
    """Map a hint anchor from source-image space to the model grid,
    clamping so the footprint stays inside."""
    x = round_half_up(hint.x * dst / src_w)
    y = round_half_up(hint.y * dst / src_h)
    x = min(max(x, 0), dst - hint.size)
    y = min(max(y, 0), dst - hint.size)
    return Hint(x=x, y=y, a=hint.a, b=hint.b, size=hint.size)


def colorize(model: Colorizer, image: RgbImage, hints: list[Hint],
             rollout_hint: int | None = None) -> ColorizeResult:
    """Colorize at the image's native resolution.

    Hints are given in native pixel coordinates and validated there before
    scaling. When rollout_hint names a hint index, the attention map for
    that hint's token is computed from the same forward pass.
    """
    for i, h in enumerate(hints):
        try:
            h.validate(image.width, image.height)
        except ValueError as exc:
            raise ValueError(f"hint {i}: {exc}") from exc

    size = model.config.image_size
    lab = rgb_to_lab(image)
    L_model = resize_bilinear_array(lab.L, size, size)
    scaled = [scale_hint(h, image.width, image.height, size) for h in hints]
    planes = encode_hints(scaled, size, size)
    x = build_model_input(L_model, planes)

    want_rollout = rollout_hint is not None
    if want_rollout:
        if not hints:
            raise ValueError("rollout requested but no hints were provided")
        if not -len(hints) <= rollout_hint < len(hints):
            raise ValueError(
                f"rollout hint index {rollout_hint} out of range for {len(hints)} hints"
            )

    start = time.perf_counter()
    if want_rollout:
        ab_t, records = model.forward(x, record_attention=True)
    else:
        ab_t = model.forward(x)
    latency_ms = int(round((time.perf_counter() - start) * 1000.0))

    ab = denormalize_ab(np.asarray(ab_t.data, dtype=np.float64))
    a_full = resize_bilinear_array(ab[..., 0], image.height, image.width)
    b_full = resize_bilinear_array(ab[..., 1], image.height, image.width)
    out = lab_to_rgb(
        LabImage(width=image.width, height=image.height, L=lab.L, a=a_full, b=b_full)
    )

    grid = None
    if want_rollout:
        rr = attention_rollout(records)
        token = hint_token_index(scaled[rollout_hint], model.config)
        G = model.config.grid_size
        grid = rr[token].reshape(G, G)
    return ColorizeResult(image=out, latency_ms=latency_ms, rollout_grid=grid)
