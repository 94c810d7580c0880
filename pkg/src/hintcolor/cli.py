"""Command-line entry point.

Subcommands: train, eval, colorize, rollout, bench, serve.
Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from .colorspace import rgb_to_lab
from .dataio import (
    load_checkpoint,
    load_dataset,
    load_png,
    save_checkpoint,
    save_gray_png,
    save_png,
)
from .hints import hints_from_json
from .infer import colorize
from .metrics import evaluate
from .model import Colorizer, ModelConfig, count_flops, init_params
from .rollout import heatmap_to_json, upsample_nearest
from .train import TrainConfig, TrainingDivergedError, train

DEFAULT_EVAL_HINTS = "0,1,2,5,10,25,50,100"


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; this CLI reserves
    2 for runtime failures, so usage errors exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def model_config_from_dict(d: dict) -> ModelConfig:
    d = dict(d)
    preset = d.pop("preset", None)
    if preset is not None:
        return ModelConfig.preset(preset, **d)
    return ModelConfig(**d)


def _load_train_config(path) -> tuple[ModelConfig, TrainConfig]:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"could not read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValueError(f"config {path} must be a JSON object")
    model_cfg = model_config_from_dict(raw.get("model", {"preset": "toy"}))
    train_cfg = TrainConfig.from_dict(raw.get("train", {}))
    return model_cfg, train_cfg


def cmd_train(args) -> int:
    model_cfg, train_cfg = _load_train_config(args.config)
    params = init_params(model_cfg, seed=train_cfg.seed)
    dataset = None
    if args.data:
        images = load_dataset(args.data, size=model_cfg.image_size)
        dataset = [rgb_to_lab(img) for img in images]
    log_path = args.log or str(args.output) + ".log"

    def progress(step, loss):
        if not args.quiet:
            print(f"step {step}: loss {loss:.6f}", flush=True)

    losses = train(params, model_cfg, train_cfg, dataset=dataset,
                   log_path=log_path, progress=progress)
    save_checkpoint(params, model_cfg, args.output)
    if not args.quiet:
        print(f"wrote {args.output} (final loss {losses[-1]:.6f})")
    return 0


def cmd_eval(args) -> int:
    params, config = load_checkpoint(args.checkpoint)
    model = Colorizer(params, config)
    dataset = load_dataset(args.data, size=config.image_size)
    hint_counts = [int(part) for part in args.hints.split(",") if part.strip() != ""]
    if not hint_counts:
        raise ValueError("hints list is empty")
    report = evaluate(model, dataset, hint_counts, seed=args.seed,
                      hpr_steps=args.hpr_steps)
    out = Path(args.output)
    out.with_suffix(".json").write_text(report.to_json(), encoding="utf-8")
    out.with_suffix(".csv").write_text(report.psnr_curve_csv(), encoding="utf-8")
    if not args.quiet:
        for n in sorted(report.psnr_at):
            print(f"psnr@{n}: {report.psnr_at[n]:.4f} dB")
        print(f"pev@{report.pev_hints}: {report.pev:.6f}")
    return 0


def cmd_colorize(args) -> int:
    params, config = load_checkpoint(args.checkpoint)
    model = Colorizer(params, config)
    image = load_png(args.image)
    hints = []
    if args.hints:
        hints = hints_from_json(Path(args.hints).read_text(encoding="utf-8"))
    result = colorize(model, image, hints)
    save_png(result.image, args.output)
    if not args.quiet:
        print(f"wrote {args.output} ({result.latency_ms} ms forward)")
    return 0


def cmd_rollout(args) -> int:
    params, config = load_checkpoint(args.checkpoint)
    model = Colorizer(params, config)
    image = load_png(args.image)
    hints = hints_from_json(Path(args.hints).read_text(encoding="utf-8"))
    if not hints:
        raise ValueError("rollout needs at least one hint")
    result = colorize(model, image, hints, rollout_hint=args.hint_index)
    grid = result.rollout_grid
    if args.upsample:
        grid_png = upsample_nearest(grid, config.patch_size)
    else:
        grid_png = grid
    out = Path(args.output)
    save_gray_png(grid_png, out.with_suffix(".png"))
    out.with_suffix(".json").write_text(heatmap_to_json(grid), encoding="utf-8")
    if not args.quiet:
        print(f"wrote {out.with_suffix('.png')} and {out.with_suffix('.json')}")
    return 0


def cmd_bench(args) -> int:
    if args.checkpoint:
        params, config = load_checkpoint(args.checkpoint)
        name = f"checkpoint:{args.checkpoint}"
    else:
        config = ModelConfig.preset(args.preset)
        params = init_params(config, seed=0)
        name = args.preset
    model = Colorizer(params, config)
    rng = np.random.default_rng(0)
    x = rng.uniform(-1.0, 1.0, size=(config.image_size, config.image_size, 4))
    for _ in range(args.warmup):
        model.forward(x)
    samples = []
    for _ in range(args.runs):
        start = time.perf_counter()
        model.forward(x)
        samples.append((time.perf_counter() - start) * 1000.0)
    samples.sort()
    result = {
        "config": name,
        "runs": args.runs,
        "warmup": args.warmup,
        "mean_ms": statistics.fmean(samples),
        "median_ms": statistics.median(samples),
        "p95_ms": samples[min(len(samples) - 1, int(0.95 * len(samples)))],
        "gflops": count_flops(config),
        "parameter_count": model.parameter_count(),
    }
    text = json.dumps(result, indent=2)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    print(text)
    return 0


def cmd_serve(args) -> int:
    from . import service

    static_dir = args.static
    if static_dir is None:
        candidate = Path("frontend") / "dist"
        if candidate.is_dir():
            static_dir = candidate
    service.run(args.checkpoint, port=args.port,
                max_image_dim=args.max_image_dim, static_dir=static_dir,
                host=args.host)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hintcolor",
                     description="Point-interactive image colorization toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    p.add_argument("--config", required=True, help="JSON config file")
    p.add_argument("--output", required=True, help="checkpoint output path")
    p.add_argument("--data", help="directory of PNG training images")
    p.add_argument("--log", help="metrics log path (default: <output>.log)")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="run the measurement suite on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="directory of PNG images")
    p.add_argument("--hints", default=DEFAULT_EVAL_HINTS,
                   help="comma-separated hint counts")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hpr-steps", type=int, default=10)
    p.add_argument("--output", required=True,
                   help="report path prefix (.json and .csv are written)")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("colorize", help="colorize one image")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--hints", help="hints JSON file (omit for unconditional)")
    p.add_argument("--output", required=True)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_colorize)

    p = sub.add_parser("rollout", help="export a hint attention heat map")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--hints", required=True, help="hints JSON file")
    p.add_argument("--hint-index", type=int, default=-1,
                   help="which hint to visualize (default: last)")
    p.add_argument("--upsample", action="store_true",
                   help="write the PNG at pixel resolution")
    p.add_argument("--output", required=True, help="output path prefix")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("bench", help="latency and FLOPs benchmark")
    p.add_argument("--preset", default="toy",
                   choices=("base", "small", "tiny", "toy"))
    p.add_argument("--checkpoint", help="bench a checkpoint instead of a preset")
    p.add_argument("--runs", type=int, default=30)
    p.add_argument("--warmup", type=int, default=5)
    p.add_argument("--output", help="also write the JSON result here")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="run the HTTP inference service")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--port", type=int, default=8290)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--max-image-dim", type=int, default=4096)
    p.add_argument("--static", help="static asset directory to serve at /")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return int(code) if code is not None else 0
    try:
        return args.func(args)
    except TrainingDivergedError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
