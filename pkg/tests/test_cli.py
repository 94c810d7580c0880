"""End-to-end command-line runs: every subcommand, the exit-code contract
(0 ok, 1 usage, 2 runtime), and byte agreement with the library calls."""

import json
import subprocess
import sys

import numpy as np
import pytest

from hintcolor.cli import DEFAULT_EVAL_HINTS, main, model_config_from_dict
from hintcolor.colorspace import RgbImage
from hintcolor.dataio import (
    encode_png_bytes,
    load_checkpoint,
    load_png,
    save_checkpoint,
    save_dataset,
    save_png,
)
from hintcolor.hints import Hint, hints_to_json
from hintcolor.infer import colorize
from hintcolor.model import Colorizer, ModelConfig, count_flops, init_params


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """A checkpoint, a test image and a hints file shared by the commands."""
    root = tmp_path_factory.mktemp("cli")
    cfg = ModelConfig(image_size=32, patch_size=8, depth=2, dim=32, heads=2,
                      mlp_dim=64)
    params = init_params(cfg, seed=0)
    ckpt = root / "model.ckpt"
    save_checkpoint(params, cfg, ckpt)

    rng = np.random.default_rng(0)
    img = RgbImage.from_array(rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8))
    image_path = root / "input.png"
    save_png(img, image_path)

    hints = [Hint(x=4, y=4, a=30.0, b=-10.0, size=2)]
    hints_path = root / "hints.json"
    hints_path.write_text(hints_to_json(hints))

    data_dir = root / "data"
    imgs = [RgbImage.from_array(rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8))
            for _ in range(2)]
    save_dataset(imgs, data_dir)
    return {
        "root": root, "config": cfg, "params": params, "ckpt": ckpt,
        "image": image_path, "img": img, "hints_file": hints_path,
        "hints": hints, "data": data_dir,
    }


def train_config_json(tmp_path, **train_overrides):
    cfg = {
        "model": {"image_size": 32, "patch_size": 8, "depth": 1, "dim": 16,
                  "heads": 2, "mlp_dim": 32},
        "train": {"steps": 3, "batch": 1, "dataset_size": 2, "hint_max": 4,
                  **train_overrides},
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


class TestUsageErrors:
    def test_no_arguments(self, capsys):
        assert main([]) == 1
        assert "usage" in capsys.readouterr().err

    def test_unknown_subcommand(self, capsys):
        assert main(["paint"]) == 1

    def test_missing_required_flag(self, capsys):
        assert main(["train", "--output", "x.ckpt"]) == 1
        assert "--config" in capsys.readouterr().err

    def test_bad_bench_preset(self, capsys):
        assert main(["bench", "--preset", "giant"]) == 1

    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0
        assert "usage" in capsys.readouterr().out


class TestTrain:
    def test_writes_checkpoint_and_log(self, tmp_path, capsys):
        cfg_path = train_config_json(tmp_path)
        out = tmp_path / "m.ckpt"
        assert main(["train", "--config", str(cfg_path),
                     "--output", str(out)]) == 0
        assert out.exists()
        log_lines = (tmp_path / "m.ckpt.log").read_text().splitlines()
        assert len(log_lines) == 3
        assert {"step", "loss", "lr", "elapsed_ms"} == set(json.loads(log_lines[0]))
        params, cfg = load_checkpoint(out)
        assert cfg.depth == 1
        assert "step 0" in capsys.readouterr().out

    def test_byte_identical_reruns(self, tmp_path, capsys):
        cfg_path = train_config_json(tmp_path)
        a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        assert main(["train", "--config", str(cfg_path), "--output", str(a),
                     "--quiet"]) == 0
        assert main(["train", "--config", str(cfg_path), "--output", str(b),
                     "--quiet"]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_custom_log_and_data_dir(self, tmp_path, workdir, capsys):
        cfg_path = train_config_json(tmp_path)
        out = tmp_path / "d.ckpt"
        log = tmp_path / "custom.ndjson"
        assert main(["train", "--config", str(cfg_path), "--output", str(out),
                     "--data", str(workdir["data"]), "--log", str(log),
                     "--quiet"]) == 0
        assert log.exists() and not (tmp_path / "d.ckpt.log").exists()
        assert capsys.readouterr().out == ""

    def test_divergence_exits_2(self, tmp_path, capsys):
        # an absurd lr overflows the float32 weights within two updates and
        # the NaN loss trips the divergence guard
        cfg_path = train_config_json(tmp_path, lr=1e30, steps=6)
        with np.errstate(invalid="ignore", over="ignore"):
            code = main(["train", "--config", str(cfg_path),
                         "--output", str(tmp_path / "x.ckpt"), "--quiet"])
        assert code == 2
        assert "training diverged" in capsys.readouterr().err

    def test_bad_config_file_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "broken.json"
        bad.write_text("{not json")
        assert main(["train", "--config", str(bad),
                     "--output", str(tmp_path / "x.ckpt")]) == 2
        assert "could not read config" in capsys.readouterr().err

    def test_model_config_from_dict_preset(self):
        cfg = model_config_from_dict({"preset": "toy", "ls_kind": "linear"})
        assert cfg == ModelConfig.toy(ls_kind="linear")
        plain = model_config_from_dict({"image_size": 32, "patch_size": 8,
                                        "depth": 1, "dim": 16, "heads": 2,
                                        "mlp_dim": 32})
        assert plain.depth == 1


class TestEval:
    def test_writes_json_and_csv(self, workdir, tmp_path, capsys):
        out = tmp_path / "report"
        assert main(["eval", "--checkpoint", str(workdir["ckpt"]),
                     "--data", str(workdir["data"]), "--hints", "0,2",
                     "--hpr-steps", "2", "--output", str(out)]) == 0
        rep = json.loads((tmp_path / "report.json").read_text())
        assert set(rep["psnr_at"]) == {"0", "2"}
        assert set(rep["hpr_at"]) == {"1", "2"}
        assert rep["n_images"] == 2
        csv_text = (tmp_path / "report.csv").read_text()
        assert csv_text.startswith("n,mean_psnr,n_images,seed")
        stdout = capsys.readouterr().out
        assert "psnr@0" in stdout and "pev@10" in stdout

    def test_default_hint_list(self):
        assert DEFAULT_EVAL_HINTS == "0,1,2,5,10,25,50,100"

    def test_empty_hints_exits_2(self, workdir, tmp_path, capsys):
        assert main(["eval", "--checkpoint", str(workdir["ckpt"]),
                     "--data", str(workdir["data"]), "--hints", ",",
                     "--output", str(tmp_path / "r")]) == 2
        assert "hints list is empty" in capsys.readouterr().err

    def test_missing_checkpoint_exits_2(self, workdir, tmp_path, capsys):
        assert main(["eval", "--checkpoint", str(tmp_path / "no.ckpt"),
                     "--data", str(workdir["data"]),
                     "--output", str(tmp_path / "r")]) == 2


class TestColorize:
    def test_matches_library_bytes(self, workdir, tmp_path, capsys):
        out = tmp_path / "colorized.png"
        assert main(["colorize", "--checkpoint", str(workdir["ckpt"]),
                     "--image", str(workdir["image"]),
                     "--hints", str(workdir["hints_file"]),
                     "--output", str(out), "--quiet"]) == 0
        model = Colorizer(workdir["params"], workdir["config"])
        want = colorize(model, workdir["img"], workdir["hints"])
        assert out.read_bytes() == encode_png_bytes(want.image)

    def test_unconditional_without_hints(self, workdir, tmp_path, capsys):
        out = tmp_path / "plain.png"
        assert main(["colorize", "--checkpoint", str(workdir["ckpt"]),
                     "--image", str(workdir["image"]),
                     "--output", str(out)]) == 0
        assert "ms forward" in capsys.readouterr().out
        assert load_png(out).width == 32

    def test_missing_image_exits_2(self, workdir, tmp_path, capsys):
        assert main(["colorize", "--checkpoint", str(workdir["ckpt"]),
                     "--image", str(tmp_path / "ghost.png"),
                     "--output", str(tmp_path / "o.png")]) == 2


class TestRollout:
    def test_writes_png_and_json(self, workdir, tmp_path, capsys):
        prefix = tmp_path / "roll"
        assert main(["rollout", "--checkpoint", str(workdir["ckpt"]),
                     "--image", str(workdir["image"]),
                     "--hints", str(workdir["hints_file"]),
                     "--output", str(prefix), "--quiet"]) == 0
        G = workdir["config"].grid_size
        heat = json.loads((tmp_path / "roll.json").read_text())
        assert heat["height"] == heat["width"] == G
        vals = np.array(heat["values"])
        assert vals.shape == (G, G)
        assert vals.sum() == pytest.approx(1.0, abs=1e-9)
        png = load_png(tmp_path / "roll.png")
        assert (png.width, png.height) == (G, G)

    def test_upsampled_png(self, workdir, tmp_path, capsys):
        prefix = tmp_path / "big"
        assert main(["rollout", "--checkpoint", str(workdir["ckpt"]),
                     "--image", str(workdir["image"]),
                     "--hints", str(workdir["hints_file"]), "--upsample",
                     "--output", str(prefix), "--quiet"]) == 0
        png = load_png(tmp_path / "big.png")
        cfg = workdir["config"]
        assert png.width == cfg.grid_size * cfg.patch_size

    def test_empty_hints_exits_2(self, workdir, tmp_path, capsys):
        empty = tmp_path / "none.json"
        empty.write_text("[]")
        assert main(["rollout", "--checkpoint", str(workdir["ckpt"]),
                     "--image", str(workdir["image"]), "--hints", str(empty),
                     "--output", str(tmp_path / "r")]) == 2
        assert "at least one hint" in capsys.readouterr().err

    def test_bad_hint_index_exits_2(self, workdir, tmp_path, capsys):
        assert main(["rollout", "--checkpoint", str(workdir["ckpt"]),
                     "--image", str(workdir["image"]),
                     "--hints", str(workdir["hints_file"]),
                     "--hint-index", "7",
                     "--output", str(tmp_path / "r")]) == 2
        assert "out of range" in capsys.readouterr().err


class TestBench:
    def test_preset_run(self, tmp_path, capsys):
        out = tmp_path / "bench.json"
        assert main(["bench", "--preset", "toy", "--runs", "3",
                     "--warmup", "1", "--output", str(out)]) == 0
        stdout_doc = json.loads(capsys.readouterr().out)
        file_doc = json.loads(out.read_text())
        assert stdout_doc == file_doc
        assert stdout_doc["config"] == "toy"
        assert stdout_doc["runs"] == 3
        assert stdout_doc["gflops"] == count_flops(ModelConfig.toy())
        assert stdout_doc["parameter_count"] == 293_968
        assert stdout_doc["mean_ms"] > 0
        assert stdout_doc["median_ms"] <= stdout_doc["p95_ms"] * 1.0001

    def test_checkpoint_run(self, workdir, capsys):
        assert main(["bench", "--checkpoint", str(workdir["ckpt"]),
                     "--runs", "2", "--warmup", "0"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["config"].startswith("checkpoint:")


class TestConsoleScript:
    def test_installed_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-c",
             "import sys; from hintcolor.cli import main; sys.exit(main(sys.argv[1:]))",
             "bench", "--preset", "toy", "--runs", "1", "--warmup", "0"],
            capture_output=True, text=True, timeout=120,
        )
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["config"] == "toy"
