"""Point-interactive image colorization.

A grayscale image plus a handful of user-placed color hints goes through
a Transformer encoder over image patches and comes back fully colorized
in real time. The package bundles the network and its training loop, the
colorization quality metrics, attention-rollout interpretation, a binary
checkpoint format, an HTTP service and a CLI.
"""

from .colorspace import (
    LabImage,
    RgbImage,
    lab_to_rgb,
    rgb_to_lab,
)
from .estimator import PointColorizer
from .hints import Hint, HintPlanes, encode_hints, simulate_hints
from .model import Colorizer, ModelConfig, ModelParams, count_flops, init_params
from .train import TrainConfig, TrainingDivergedError, make_synthetic_dataset
from .metrics import EvalReport, evaluate, psnr
from .dataio import load_checkpoint, load_png, save_checkpoint, save_png

__version__ = "0.1.0"

__all__ = [
    "Colorizer",
    "EvalReport",
    "Hint",
    "HintPlanes",
    "LabImage",
    "ModelConfig",
    "ModelParams",
    "PointColorizer",
    "RgbImage",
    "TrainConfig",
    "TrainingDivergedError",
    "count_flops",
    "encode_hints",
    "evaluate",
    "init_params",
    "lab_to_rgb",
    "load_checkpoint",
    "load_png",
    "make_synthetic_dataset",
    "psnr",
    "rgb_to_lab",
    "save_checkpoint",
    "save_png",
    "simulate_hints",
    "__version__",
]
