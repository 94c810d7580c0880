"""Estimator-style wrapper: fit on color images, predict colorizations
from grayscale planes plus optional hint lists.

Follows the scikit-learn conventions: constructor arguments are stored
verbatim, fitted state lives in trailing-underscore attributes, and
get_params/set_params come from BaseEstimator.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .colorspace import RgbImage, rgb_to_lab
from .metrics import psnr
from .model import Colorizer, ModelConfig, init_params, predict_image
from .train import TrainConfig, train
from .validation import coerce_hint_lists, validate_gray_batch, validate_rgb_batch


class PointColorizer(BaseEstimator):
    """Point-interactive colorization as a scikit-learn style estimator.

    Parameters
    ----------
    preset : str, model size preset ("base", "small", "tiny", "toy").
    ls_kind : str, stabilizing layer before pixel shuffling.
    steps, batch, lr, weight_decay, min_lr : training schedule.
    hint_max, hint_size : hint simulation during training.
    seed : controls init, data sampling and hint simulation.
    """

    def __init__(self, preset="toy", ls_kind="convolution", steps=200,
                 batch=4, lr=5e-4, weight_decay=0.05, hint_max=128,
                 hint_size=2, seed=0, min_lr=0.0):
        self.preset = preset
        self.ls_kind = ls_kind
        self.steps = steps
        self.batch = batch
        self.lr = lr
        self.weight_decay = weight_decay
        self.hint_max = hint_max
        self.hint_size = hint_size
        self.seed = seed
        self.min_lr = min_lr

    def _model_config(self) -> ModelConfig:
        return ModelConfig.preset(self.preset, ls_kind=self.ls_kind)

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            steps=self.steps,
            batch=self.batch,
            lr=self.lr,
            weight_decay=self.weight_decay,
            hint_max=self.hint_max,
            hint_size=self.hint_size,
            seed=self.seed,
            min_lr=self.min_lr,
        )

    def fit(self, X, y=None):
        """Train on a batch of color images; y is ignored (the images are
        their own targets)."""
        config = self._model_config()
        batch = validate_rgb_batch(X)
        if batch.shape[1:3] != (config.image_size, config.image_size):
            raise ValueError(
                f"images are {batch.shape[1:3]}, preset {self.preset!r} "
                f"expects ({config.image_size}, {config.image_size})"
            )
        dataset = [rgb_to_lab(RgbImage.from_array(img)) for img in batch]
        params = init_params(config, seed=self.seed)
        losses = train(params, config, self._train_config(), dataset=dataset)
        self.config_ = config
        self.params_ = params
        self.loss_history_ = losses
        self.n_images_ = len(dataset)
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError(
                "this PointColorizer is not fitted yet; call fit first"
            )

    def predict(self, X, hints=None) -> np.ndarray:
        """Colorize grayscale planes; returns (n, H, W, 3) uint8.

        X may be (n, H, W) L planes in [0, 100] or (n, H, W, 3) uint8 color
        images whose luminance is used. hints is an optional per-image list
        of Hint objects or {"x","y","a","b","size"} dicts.
        """
        self._check_fitted()
        planes = validate_gray_batch(X, self.config_.image_size)
        hint_lists = coerce_hint_lists(hints, len(planes))
        out = [
            predict_image(L, hl, self.params_, self.config_).data
            for L, hl in zip(planes, hint_lists)
        ]
        return np.stack(out)

    def transform(self, X) -> np.ndarray:
        """Unconditional colorization of grayscale planes."""
        return self.predict(X)

    def score(self, X, y) -> float:
        """Mean PSNR (dB) of hint-free colorizations against ground truth."""
        self._check_fitted()
        truth = validate_rgb_batch(y)
        preds = self.predict(X)
        if preds.shape != truth.shape:
            raise ValueError(
                f"prediction shape {preds.shape} does not match y {truth.shape}"
            )
        scores = [
            psnr(RgbImage.from_array(p), RgbImage.from_array(t))
            for p, t in zip(preds, truth)
        ]
        return float(np.mean(scores))

    def colorizer_(self) -> Colorizer:
        """The underlying inference bundle for the service/CLI pipelines."""
        self._check_fitted()
        return Colorizer(self.params_, self.config_)
