"""Attention rollout: estimate how much each image token influences each
other token by multiplying residual-adjusted attention matrices through
the encoder stack, then read off the row of the token holding a user hint.
"""

from __future__ import annotations

import json

import numpy as np

from .hints import Hint
from .model import ModelConfig, ModelParams, forward

ROW_SUM_TOL = 1e-3


def attention_rollout(records: list[np.ndarray]) -> np.ndarray:
    """Collapse per-layer attention into one token-influence matrix.

    Each record is a (heads, N, N) post-softmax attention array. Per layer:
    average the heads, mix in the identity at weight 1/2 for the residual
    path, renormalize rows. The rollout is the ordered product
    layer_L @ ... @ layer_1.
    """
    if not records:
        raise ValueError("attention_rollout needs at least one layer record")
    rollout = None
    for li, rec in enumerate(records):
        rec = np.asarray(rec, dtype=np.float64)
        if rec.ndim != 3 or rec.shape[1] != rec.shape[2]:
            raise ValueError(
                f"layer {li}: expected (heads, N, N) attention, got {rec.shape}"
            )
        row_sums = rec.sum(axis=-1)
        if np.max(np.abs(row_sums - 1.0)) > ROW_SUM_TOL:
            raise ValueError(
                f"layer {li}: attention rows do not sum to 1 "
                f"(max deviation {np.max(np.abs(row_sums - 1.0)):.2e}); corrupt record"
            )
        mixed = 0.5 * rec.mean(axis=0) + 0.5 * np.eye(rec.shape[1])
        mixed /= mixed.sum(axis=-1, keepdims=True)
        rollout = mixed if rollout is None else mixed @ rollout
    return rollout


def hint_token_index(hint: Hint, config: ModelConfig) -> int:
    """Flat index of the patch-grid token containing the hint anchor."""
    hint.validate(config.image_size, config.image_size)
    P = config.patch_size
    return (hint.y // P) * config.grid_size + (hint.x // P)


def hint_attention_map(x: np.ndarray, hint: Hint, params: ModelParams,
                       config: ModelConfig) -> np.ndarray:
    """Rollout row of the hint's token, reshaped to the (G, G) patch grid.

    Entry (gy, gx) is the rollout attention of the hint token onto the
    token at grid position (gy, gx).
    """
    _, records = forward(x, params, config, record_attention=True)
    rollout = attention_rollout(records)
    row = rollout[hint_token_index(hint, config)]
    G = config.grid_size
    return row.reshape(G, G)


def upsample_nearest(grid: np.ndarray, factor: int) -> np.ndarray:
    """Repeat each cell factor x factor; display plumbing for overlays."""
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    return np.repeat(np.repeat(grid, factor, axis=0), factor, axis=1)


def heatmap_to_json(grid: np.ndarray) -> str:
    """Raw row-major grid values as a JSON object."""
    grid = np.asarray(grid, dtype=np.float64)
    return json.dumps(
        {"height": grid.shape[0], "width": grid.shape[1], "values": grid.tolist()},
        indent=2,
    )
