"""Input validation helpers for the estimator-style API."""

from __future__ import annotations

import numpy as np

from .colorspace import RgbImage
from .hints import Hint


def validate_rgb_batch(X) -> np.ndarray:
    """Coerce a batch of color images to a (n, H, W, 3) uint8 array.

    Accepts a list of RgbImage, a list of arrays, or a single 4-D array.
    All images must share one size.
    """
    if isinstance(X, np.ndarray):
        if X.ndim != 4 or X.shape[-1] != 3:
            raise ValueError(f"expected (n, H, W, 3) array, got shape {X.shape}")
        if X.dtype != np.uint8:
            raise ValueError(f"expected uint8 images, got dtype {X.dtype}")
        return X
    items = list(X)
    if not items:
        raise ValueError("empty image batch")
    arrays = []
    for i, item in enumerate(items):
        if isinstance(item, RgbImage):
            arrays.append(item.data)
        else:
            arr = np.asarray(item)
            if arr.ndim != 3 or arr.shape[-1] != 3 or arr.dtype != np.uint8:
                raise ValueError(
                    f"batch item {i}: expected (H, W, 3) uint8, got "
                    f"shape {arr.shape} dtype {arr.dtype}"
                )
            arrays.append(arr)
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise ValueError(f"batch mixes image shapes: {sorted(shapes)}")
    return np.stack(arrays)


def validate_gray_batch(X, size: int) -> np.ndarray:
    """Coerce to (n, size, size) float64 L planes in [0, 100].

    A (n, H, W, 3) uint8 batch is converted through Lab; (n, H, W) arrays
    are taken as L planes directly.
    """
    from .colorspace import rgb_array_to_lab

    arr = np.asarray(X)
    if arr.ndim == 4:
        arr = rgb_array_to_lab(validate_rgb_batch(X))[..., 0]
    elif arr.ndim == 3 and arr.dtype == np.uint8 and arr.shape[-1] == 3:
        raise ValueError(
            "got a single (H, W, 3) image; wrap it in a length-1 batch"
        )
    elif arr.ndim != 3:
        raise ValueError(f"expected (n, H, W) L planes, got shape {arr.shape}")
    arr = np.asarray(arr, dtype=np.float64)
    if arr.shape[1:] != (size, size):
        raise ValueError(
            f"L planes are {arr.shape[1:]}, model expects ({size}, {size})"
        )
    if arr.min() < -1e-6 or arr.max() > 100.0 + 1e-6:
        raise ValueError("L values must lie in [0, 100]")
    return arr


def coerce_hint_lists(hints, n: int) -> list[list[Hint]]:
    """Normalize per-image hint lists: None means no hints anywhere."""
    if hints is None:
        return [[] for _ in range(n)]
    hints = list(hints)
    if len(hints) != n:
        raise ValueError(f"got {len(hints)} hint lists for {n} images")
    out = []
    for i, hlist in enumerate(hints):
        coerced = []
        for j, h in enumerate(hlist or []):
            if isinstance(h, Hint):
                coerced.append(h)
            elif isinstance(h, dict):
                try:
                    coerced.append(
                        Hint(
                            x=int(h["x"]),
                            y=int(h["y"]),
                            a=float(h["a"]),
                            b=float(h["b"]),
                            size=int(h.get("size", 2)),
                        )
                    )
                except KeyError as exc:
                    raise ValueError(
                        f"hint {j} for image {i} missing field {exc}"
                    ) from exc
            else:
                raise ValueError(
                    f"hint {j} for image {i} must be a Hint or a dict"
                )
        out.append(coerced)
    return out
