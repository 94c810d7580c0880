"""Shared fixtures.

The two toy-scale trained models used by the efficacy and ablation tests
are expensive to produce, so their checkpoints are cached on disk under
tests/_cache keyed by a hash of the full training recipe. Delete the
cache directory to force retraining.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from hintcolor.dataio import load_checkpoint, save_checkpoint
from hintcolor.model import Colorizer, ModelConfig, init_params
from hintcolor.train import TrainConfig, make_synthetic_dataset, train

CACHE_DIR = Path(__file__).parent / "_cache"

# Training recipe for the acceptance-scale toy models. The dataset is
# large enough that the network cannot memorize it and must learn to
# propagate hint colors, which is what the efficacy criteria measure.
TOY_STEPS = 2500
TOY_BATCH = 8
TOY_SEED = 0
TOY_DATASET_SIZE = 512
HELD_OUT_SEED = 777
HELD_OUT_COUNT = 100


def toy_train_config() -> TrainConfig:
    return TrainConfig(steps=TOY_STEPS, batch=TOY_BATCH, seed=TOY_SEED,
                       dataset_size=TOY_DATASET_SIZE)


def _recipe_key(model_cfg: ModelConfig, train_cfg: TrainConfig) -> str:
    blob = json.dumps(
        {"model": model_cfg.to_dict(), "train": train_cfg.to_dict()},
        sort_keys=True,
    )
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def trained_toy_model(ls_kind: str) -> tuple[Colorizer, list[float]]:
    """Train (or load from cache) the toy model with the given LS kind."""
    model_cfg = ModelConfig.toy(ls_kind=ls_kind)
    train_cfg = toy_train_config()
    key = _recipe_key(model_cfg, train_cfg)
    ckpt = CACHE_DIR / f"toy-{ls_kind}-{key}.ckpt"
    loss_file = CACHE_DIR / f"toy-{ls_kind}-{key}.losses.json"
    if ckpt.exists() and loss_file.exists():
        params, cfg = load_checkpoint(ckpt)
        losses = json.loads(loss_file.read_text())
        return Colorizer(params, cfg), losses

    CACHE_DIR.mkdir(exist_ok=True)
    params = init_params(model_cfg, seed=train_cfg.seed)
    losses = train(params, model_cfg, train_cfg)
    save_checkpoint(params, model_cfg, ckpt)
    loss_file.write_text(json.dumps(losses))
    return Colorizer(params, model_cfg), losses


@pytest.fixture(scope="session")
def trained_conv():
    model, _ = trained_toy_model("convolution")
    return model


@pytest.fixture(scope="session")
def trained_conv_losses():
    _, losses = trained_toy_model("convolution")
    return losses


@pytest.fixture(scope="session")
def trained_linear():
    model, _ = trained_toy_model("linear")
    return model


@pytest.fixture(scope="session")
def held_out_images():
    """Held-out synthetic images at toy resolution, disjoint seed."""
    return make_synthetic_dataset(
        np.random.default_rng(HELD_OUT_SEED), HELD_OUT_COUNT, 64
    )


@pytest.fixture(scope="session")
def tiny_config():
    """A deliberately small config for fast pipeline tests (not a preset)."""
    return ModelConfig(
        image_size=32, patch_size=8, depth=2, dim=32, heads=2, mlp_dim=64
    )
