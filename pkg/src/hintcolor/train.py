"""Toy-scale training: hint-conditioned chroma reconstruction with Huber
loss, AdamW, cosine-annealed learning rate and a procedural dataset.

The loop fits the network to predict normalized ab planes from grayscale
plus sparse color hints. Hint count per image is uniform on {0..hint_max};
hint colors are ground-truth patch means, matching the inference-time
simulation protocol.
"""

from __future__ import annotations

import colorsys
import json
import math
import time
from dataclasses import dataclass, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .colorspace import LabImage, RgbImage, normalize_ab, rgb_array_to_lab, rgb_to_lab
from .dataio import resize_bilinear_array
from .hints import build_model_input, encode_hints, simulate_hints
from .model import ModelConfig, ModelParams, forward


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite; parameters are no longer meaningful."""


@dataclass
class TrainConfig:
    steps: int = 200
    batch: int = 4
    lr: float = 5e-4
    weight_decay: float = 0.05
    betas: tuple = (0.9, 0.999)
    hint_max: int = 128
    hint_size: int = 2
    seed: int = 0
    min_lr: float = 0.0
    dataset_size: int = 64

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.batch < 1:
            raise ValueError(f"batch must be >= 1, got {self.batch}")
        if self.hint_max < 0:
            raise ValueError(f"hint_max must be >= 0, got {self.hint_max}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "betas" in d:
            d["betas"] = tuple(d["betas"])
        return cls(**d)


class OptimizerState:
    """AdamW moment accumulators, keyed like the parameter set."""

    def __init__(self, params: ModelParams):
        self.step = 0
        self.m = {name: np.zeros_like(t.data) for name, t in params}
        self.v = {name: np.zeros_like(t.data) for name, t in params}


# LN scales/offsets and every kind of bias stay out of weight decay.
_NO_DECAY_LEAVES = ("bias", "beta", "gamma", "rel_bias")


def _decays(name: str) -> bool:
    return name.rsplit(".", 1)[-1] not in _NO_DECAY_LEAVES


def huber_loss(pred: Tensor, gt: np.ndarray) -> Tensor:
    """Mean elementwise Huber penalty with unit knee on pred - gt."""
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    diff = pred - Tensor(gt.astype(pred.dtype, copy=False))
    return ad.mean_all(ad.huber(diff))


def adamw_step(params: ModelParams, state: OptimizerState, lr: float,
               config: TrainConfig, eps: float = 1e-8) -> None:
    """One decoupled-weight-decay Adam update; gradients are left untouched."""
    beta1, beta2 = config.betas
    state.step += 1
    t = state.step
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for name, p in params:
        g = p.grad
        if g is None:
            raise ValueError(f"parameter {name!r} has no gradient")
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * np.square(g)
        if config.weight_decay != 0.0 and _decays(name):
            p.data -= lr * config.weight_decay * p.data
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def cosine_lr(step: int, total_steps: int, base_lr: float, min_lr: float = 0.0) -> float:
    """Half-cosine decay from base_lr at step 0 to min_lr at total_steps."""
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    return min_lr + 0.5 * (base_lr - min_lr) * (1.0 + math.cos(math.pi * step / total_steps))


def build_training_batch(batch: list[LabImage], rng: np.random.Generator,
                         config: TrainConfig) -> tuple[np.ndarray, np.ndarray]:
    """Simulate hints per image and stack (B, H, W, 4) inputs with their
    normalized (B, H, W, 2) chroma targets."""
    inputs = []
    targets = []
    for lab in batch:
        hints = simulate_hints(rng, lab, config.hint_max, config.hint_size)
        planes = encode_hints(hints, lab.width, lab.height)
        inputs.append(build_model_input(lab.L, planes))
        targets.append(normalize_ab(lab.ab_stack()))
    return np.stack(inputs), np.stack(targets)


def train_step(batch: list[LabImage], params: ModelParams, state: OptimizerState,
               rng: np.random.Generator, config: TrainConfig,
               model_config: ModelConfig) -> float:
    """Forward, Huber loss on normalized ab, backward, AdamW; returns the loss."""
    x, gt = build_training_batch(batch, rng, config)
    pred = forward(x, params, model_config)
    loss = huber_loss(pred, gt)
    value = float(loss.data)
    params.zero_grads()
    ad.backward(loss)
    lr = cosine_lr(state.step, config.steps, config.lr, config.min_lr)
    adamw_step(params, state, lr, config)
    params.zero_grads()
    return value


def train(params: ModelParams, model_config: ModelConfig, config: TrainConfig,
          dataset: list[LabImage] | None = None, log_path=None,
          progress=None) -> list[float]:
    """Run the full loop; returns the per-step loss history.

    Raises TrainingDivergedError the moment the loss goes non-finite.
    """
    rng = np.random.default_rng(config.seed)
    if dataset is None:
        images = make_synthetic_dataset(
            np.random.default_rng(config.seed + 1),
            n=config.dataset_size,
            size=model_config.image_size,
        )
        dataset = [rgb_to_lab(img) for img in images]
    if not dataset:
        raise ValueError("dataset is empty")
    for lab in dataset:
        if (lab.width, lab.height) != (model_config.image_size, model_config.image_size):
            raise ValueError(
                f"dataset image {lab.width}x{lab.height} does not match "
                f"model size {model_config.image_size}"
            )

    state = OptimizerState(params)
    log_file = open(log_path, "w", encoding="utf-8") if log_path else None
    losses = []
    start = time.monotonic()
    try:
        for step in range(config.steps):
            idx = rng.integers(0, len(dataset), size=config.batch)
            batch = [dataset[i] for i in idx]
            loss = train_step(batch, params, state, rng, config, model_config)
            losses.append(loss)
            if log_file:
                record = {
                    "step": step,
                    "loss": loss,
                    "lr": cosine_lr(step, config.steps, config.lr, config.min_lr),
                    "elapsed_ms": int((time.monotonic() - start) * 1000),
                }
                log_file.write(json.dumps(record) + "\n")
            if progress and (step % 10 == 0 or step == config.steps - 1):
                progress(step, loss)
            if not math.isfinite(loss):
                raise TrainingDivergedError(f"loss became non-finite at step {step}")
    finally:
        if log_file:
            log_file.close()
    return losses


def _saturated_color(rng: np.random.Generator, value: float) -> np.ndarray:
    """Random hue at fixed brightness with Lab chroma guaranteed > 25."""
    while True:
        h = float(rng.uniform(0.0, 1.0))
        s = float(rng.uniform(0.65, 1.0))
        rgb = np.array(colorsys.hsv_to_rgb(h, s, value))
        rgb8 = np.clip(np.rint(rgb * 255.0), 0, 255).astype(np.uint8)
        lab = _solid_lab(rgb8)
        if math.hypot(lab[1], lab[2]) > 25.0:
            return rgb8


def _solid_lab(rgb8: np.ndarray) -> np.ndarray:
    return rgb_array_to_lab(rgb8.reshape(1, 1, 3))[0, 0]


def _distinct_colors(rng: np.random.Generator, k: int) -> list[np.ndarray]:
    """k colors at spread-out brightness levels with pairwise ab distance > 15.

    Brightness separates regions in grayscale; hue stays independent of
    brightness so color is not predictable from luminance alone.
    """
    values = np.linspace(0.4, 0.95, k)
    rng.shuffle(values)
    for _ in range(200):
        colors = [_saturated_color(rng, float(v)) for v in values]
        labs = [_solid_lab(c) for c in colors]
        ok = all(
            math.hypot(labs[i][1] - labs[j][1], labs[i][2] - labs[j][2]) > 15.0
            for i in range(k)
            for j in range(i + 1, k)
        )
        if ok:
            return colors
    return colors  # pragma: no cover - rejection practically always succeeds


def _region_labels(rng: np.random.Generator, size: int, k: int) -> np.ndarray:
    """Partition the square into k regions by guillotine cuts or half-planes."""
    if rng.uniform() < 0.5:
        # axis-aligned guillotine rectangles, always splitting the longest
        # side of the largest remaining rectangle
        labels = np.zeros((size, size), dtype=np.int64)
        rects = [(0, 0, size, size)]
        while len(rects) < k:
            i = max(range(len(rects)), key=lambda j: rects[j][2] * rects[j][3])
            y, x, h, w = rects.pop(i)
            if w >= h:
                lo, hi = max(1, int(0.3 * w)), min(max(2, int(0.7 * w) + 1), w)
                cut = int(rng.integers(lo, hi))
                rects += [(y, x, h, cut), (y, x + cut, h, w - cut)]
            else:
                lo, hi = max(1, int(0.3 * h)), min(max(2, int(0.7 * h) + 1), h)
                cut = int(rng.integers(lo, hi))
                rects += [(y, x, cut, w), (y + cut, x, h - cut, w)]
        for label, (y, x, h, w) in enumerate(rects):
            labels[y : y + h, x : x + w] = label
        return labels
    # oblique half-planes through points near the center
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    labels = np.zeros((size, size), dtype=np.int64)
    cuts = 1 if k == 2 else int(np.ceil(np.log2(k)))
    for c in range(cuts):
        theta = rng.uniform(0.0, np.pi)
        cy, cx = rng.uniform(0.3 * size, 0.7 * size, size=2)
        side = (yy - cy) * math.sin(theta) + (xx - cx) * math.cos(theta) > 0
        labels = labels * 2 + side.astype(np.int64)
    # compact labels to 0..m-1
    _, labels = np.unique(labels, return_inverse=True)
    return labels.reshape(size, size)


def _smooth_noise(rng: np.random.Generator, size: int, cells: int = 8,
                  amplitude: float = 0.08) -> np.ndarray:
    grid = rng.normal(0.0, 1.0, size=(cells, cells))
    field = resize_bilinear_array(grid, size, size)
    return 1.0 + amplitude * field


def make_synthetic_dataset(rng: np.random.Generator, n: int, size: int) -> list[RgbImage]:
    """Procedural color images: regioned partitions and two-color gradients.

    Regions are saturated colors at distinct brightness levels plus a smooth
    multiplicative brightness texture, so luminance carries structure while
    hue remains unpredictable from it.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    images = []
    for _ in range(n):
        if rng.uniform() < 0.25:
            # smooth gradient between two colors
            colors = _distinct_colors(rng, 2)
            theta = rng.uniform(0.0, 2.0 * np.pi)
            yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
            proj = (yy - size / 2) * math.sin(theta) + (xx - size / 2) * math.cos(theta)
            t = (proj - proj.min()) / max(proj.max() - proj.min(), 1e-9)
            base = (1.0 - t[..., None]) * colors[0] + t[..., None] * colors[1]
        else:
            k = int(rng.integers(2, 5))
            labels = _region_labels(rng, size, k)
            present = np.unique(labels)
            colors = _distinct_colors(rng, len(present))
            base = np.zeros((size, size, 3), dtype=np.float64)
            for label, color in zip(present, colors):
                base[labels == label] = color
        textured = base * _smooth_noise(rng, size)[..., None]
        data = np.clip(np.rint(textured), 0, 255).astype(np.uint8)
        images.append(RgbImage.from_array(data))
    return images
