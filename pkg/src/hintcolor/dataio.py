"""File I/O: PNG images, the binary checkpoint container, bilinear resize
and directory datasets.

Checkpoint layout (all integers little-endian):

    bytes 0..3    magic b"ICLT"
    bytes 4..7    uint32 format version
    bytes 8..15   uint64 header length in bytes
    header        UTF-8 JSON: {"config": {...}, "tensors": [{name, shape, offset}]}
    payload       float32 row-major tensor data, offsets relative to payload start

The header JSON is serialized with sorted keys and compact separators so
identical parameters always produce identical bytes.
"""

from __future__ import annotations

import io
import json
import os
import struct
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .colorspace import RgbImage
from .model import ModelConfig, ModelParams, expected_param_shapes

CHECKPOINT_MAGIC = b"ICLT"
CHECKPOINT_VERSION = 1


def save_checkpoint(params: ModelParams, config: ModelConfig, path) -> None:
    """Serialize parameters and config to the binary container at `path`."""
    directory = []
    chunks = []
    offset = 0
    for name, tensor in params:
        arr = np.ascontiguousarray(tensor.data, dtype="<f4")
        directory.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.tobytes())
        offset += arr.nbytes
    header = json.dumps(
        {"config": config.to_dict(), "tensors": directory},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    try:
        with open(path, "wb") as f:
            f.write(CHECKPOINT_MAGIC)
            f.write(struct.pack("<I", CHECKPOINT_VERSION))
            f.write(struct.pack("<Q", len(header)))
            f.write(header)
            for chunk in chunks:
                f.write(chunk)
    except OSError as exc:
        raise OSError(f"could not write checkpoint to {path}: {exc}") from exc


def load_checkpoint(path, dtype=np.float32) -> tuple[ModelParams, ModelConfig]:
    """Read a checkpoint, validating layout and the tensor directory against
    the shapes the stored config implies."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise OSError(f"could not read checkpoint {path}: {exc}") from exc
    if len(raw) < 16 or raw[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint (bad magic)")
    (version,) = struct.unpack("<I", raw[4:8])
    if version != CHECKPOINT_VERSION:
        raise ValueError(
            f"{path}: unsupported checkpoint version {version} "
            f"(expected {CHECKPOINT_VERSION})"
        )
    (header_len,) = struct.unpack("<Q", raw[8:16])
    if 16 + header_len > len(raw):
        raise ValueError(f"{path}: unexpected end of file in header")
    try:
        header = json.loads(raw[16 : 16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"{path}: corrupt checkpoint header: {exc}") from exc
    if not isinstance(header, dict) or "config" not in header or "tensors" not in header:
        raise ValueError(f"{path}: checkpoint header missing config or tensors")
    try:
        config = ModelConfig.from_dict(header["config"])
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{path}: invalid checkpoint config: {exc}") from exc

    expected = expected_param_shapes(config)
    seen = set()
    payload = raw[16 + header_len :]
    params = ModelParams()
    cursor = 0
    for entry in header["tensors"]:
        name = entry.get("name")
        shape = tuple(entry.get("shape", ()))
        offset = entry.get("offset")
        if name not in expected:
            raise ValueError(f"{path}: unexpected tensor {name!r} in checkpoint")
        if name in seen:
            raise ValueError(f"{path}: duplicate tensor {name!r} in checkpoint")
        seen.add(name)
        if shape != expected[name]:
            raise ValueError(
                f"{path}: tensor {name!r} has shape {shape}, expected {expected[name]}"
            )
        if offset != cursor:
            raise ValueError(f"{path}: tensor {name!r} offset {offset} is not contiguous")
        nbytes = int(np.prod(shape, dtype=np.int64)) * 4
        if offset + nbytes > len(payload):
            raise ValueError(f"{path}: unexpected end of file in tensor {name!r}")
        arr = np.frombuffer(payload, dtype="<f4", count=nbytes // 4, offset=offset)
        params.add(name, arr.reshape(shape).astype(dtype))
        cursor += nbytes
    missing = set(expected) - seen
    if missing:
        raise ValueError(f"{path}: checkpoint missing tensors {sorted(missing)}")
    return params, config


def load_png(path) -> RgbImage:
    """Decode an image file to 8-bit RGB. Grayscale inputs get the channel
    replicated; alpha is discarded."""
    try:
        with Image.open(path) as im:
            rgb = im.convert("RGB")
            data = np.asarray(rgb, dtype=np.uint8)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise ValueError(f"could not decode image {path}: {exc}") from exc
    return RgbImage.from_array(data)


def decode_png_bytes(blob: bytes) -> RgbImage:
    """Like load_png but from an in-memory byte string."""
    try:
        with Image.open(io.BytesIO(blob)) as im:
            rgb = im.convert("RGB")
            data = np.asarray(rgb, dtype=np.uint8)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise ValueError(f"could not decode image bytes: {exc}") from exc
    return RgbImage.from_array(data)


def encode_png_bytes(img: RgbImage) -> bytes:
    """Deterministic PNG encoding; the CLI and the service both use this so
    identical pixels give identical files."""
    buf = io.BytesIO()
    Image.fromarray(img.data, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def save_png(img: RgbImage, path) -> None:
    try:
        with open(path, "wb") as f:
            f.write(encode_png_bytes(img))
    except OSError as exc:
        raise OSError(f"could not write image to {path}: {exc}") from exc


def save_gray_png(plane: np.ndarray, path) -> None:
    """Write a single float plane as an 8-bit grayscale PNG, min-max scaled."""
    plane = np.asarray(plane, dtype=np.float64)
    lo, hi = float(plane.min()), float(plane.max())
    if hi > lo:
        scaled = (plane - lo) / (hi - lo) * 255.0
    else:
        scaled = np.zeros_like(plane)
    data = np.clip(np.rint(scaled), 0, 255).astype(np.uint8)
    try:
        Image.fromarray(data, mode="L").save(path, format="PNG")
    except OSError as exc:
        raise OSError(f"could not write image to {path}: {exc}") from exc


def resize_bilinear_array(arr: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resampling with half-pixel centers and edge clamping.

    Works on (H, W) or (H, W, C) float arrays; returns float64.
    """
    if height < 1 or width < 1:
        raise ValueError(f"target dims must be >= 1, got ({height}, {width})")
    arr = np.asarray(arr, dtype=np.float64)
    in_h, in_w = arr.shape[:2]

    def axis_coords(n_out, n_in):
        src = (np.arange(n_out, dtype=np.float64) + 0.5) * n_in / n_out - 0.5
        i0 = np.floor(src).astype(np.int64)
        frac = src - i0
        i0c = np.clip(i0, 0, n_in - 1)
        i1c = np.clip(i0 + 1, 0, n_in - 1)
        return i0c, i1c, frac

    y0, y1, fy = axis_coords(height, in_h)
    x0, x1, fx = axis_coords(width, in_w)
    rows0 = arr[y0]
    rows1 = arr[y1]
    fy = fy.reshape(-1, *([1] * (arr.ndim - 1)))
    vert = rows0 * (1.0 - fy) + rows1 * fy
    cols0 = vert[:, x0]
    cols1 = vert[:, x1]
    fx = fx.reshape(1, -1, *([1] * (arr.ndim - 2)))
    return cols0 * (1.0 - fx) + cols1 * fx


def resize_bilinear(img: RgbImage, width: int, height: int) -> RgbImage:
    """Resize an 8-bit image; a no-op copy when dims already match."""
    if (width, height) == (img.width, img.height):
        return RgbImage.from_array(img.data.copy())
    out = resize_bilinear_array(img.data, height, width)
    return RgbImage.from_array(np.clip(np.rint(out), 0, 255).astype(np.uint8))


def load_dataset(path, size: int | None = None) -> list[RgbImage]:
    """All PNGs under `path` in sorted name order, optionally resized to
    size x size."""
    root = Path(path)
    if not root.is_dir():
        raise ValueError(f"dataset path {path} is not a directory")
    files = sorted(p for p in root.iterdir() if p.suffix.lower() == ".png")
    if not files:
        raise ValueError(f"dataset directory {path} contains no .png files")
    images = [load_png(p) for p in files]
    if size is not None:
        images = [resize_bilinear(img, size, size) for img in images]
    return images


def save_dataset(images: list[RgbImage], path) -> list[str]:
    """Write images as zero-padded numbered PNGs; returns the file names."""
    root = Path(path)
    os.makedirs(root, exist_ok=True)
    names = []
    for i, img in enumerate(images):
        name = f"{i:05d}.png"
        save_png(img, root / name)
        names.append(name)
    return names
