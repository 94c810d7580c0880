"""Hint simulation and encoding of hints into the 4-channel network input.

A hint is a small square color condition anchored at its top-left pixel.
During training hints are simulated from the ground truth: the count is
uniform on {0..max}, locations are uniform over valid anchors, and the
color is the mean chroma of the covered patch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .colorspace import LabImage, normalize_ab, normalize_l, rgb_array_to_lab


@dataclass
class Hint:
    """A point color condition: size x size patch anchored at (x, y)."""

    x: int
    y: int
    a: float
    b: float
    size: int = 2

    def validate(self, width: int, height: int) -> None:
        if self.size < 1:
            raise ValueError(f"hint size must be >= 1, got {self.size}")
        if not (0 <= self.x <= width - self.size):
            raise ValueError(
                f"hint x={self.x} out of bounds for width {width}, size {self.size}"
            )
        if not (0 <= self.y <= height - self.size):
            raise ValueError(
                f"hint y={self.y} out of bounds for height {height}, size {self.size}"
            )


@dataclass
class HintPlanes:
    """Raster encoding of a hint list: chroma planes plus a {0,1} mask."""

    width: int
    height: int
    a_plane: np.ndarray
    b_plane: np.ndarray
    mask: np.ndarray


def sample_hint_count(rng: np.random.Generator, max_hints: int) -> int:
    """Uniform integer on {0, ..., max_hints} inclusive."""
    if max_hints < 0:
        raise ValueError("max_hints must be >= 0")
    return int(rng.integers(0, max_hints + 1))


def sample_hint_locations(
    rng: np.random.Generator, n: int, width: int, height: int, size: int = 2
) -> list[tuple[int, int]]:
    """n anchors uniform over {0..W-size} x {0..H-size}; duplicates allowed."""
    if width < size or height < size:
        raise ValueError(f"image {width}x{height} too small for hint size {size}")
    xs = rng.integers(0, width - size + 1, size=n)
    ys = rng.integers(0, height - size + 1, size=n)
    return [(int(x), int(y)) for x, y in zip(xs, ys)]


def hint_color_from_image(
    img: LabImage, loc: tuple[int, int], size: int = 2
) -> tuple[float, float]:
    """Mean (a, b) over the size x size patch at anchor loc."""
    x, y = loc
    if x < 0 or y < 0 or x + size > img.width or y + size > img.height:
        raise ValueError(
            f"hint patch at ({x}, {y}) size {size} exceeds image "
            f"{img.width}x{img.height}"
        )
    a = float(np.mean(img.a[y : y + size, x : x + size]))
    b = float(np.mean(img.b[y : y + size, x : x + size]))
    return a, b


def simulate_hints(
    rng: np.random.Generator, img: LabImage, max_hints: int, size: int = 2
) -> list[Hint]:
    """Training-time hint simulation: count, locations, then ground-truth colors."""
    n = sample_hint_count(rng, max_hints)
    locs = sample_hint_locations(rng, n, img.width, img.height, size)
    hints = []
    for x, y in locs:
        a, b = hint_color_from_image(img, (x, y), size)
        hints.append(Hint(x=x, y=y, a=a, b=b, size=size))
    return hints


def sample_hints_at_n(
    rng: np.random.Generator, img: LabImage, n: int, size: int = 2
) -> list[Hint]:
    """Exactly n simulated hints with ground-truth patch-mean colors."""
    locs = sample_hint_locations(rng, n, img.width, img.height, size)
    hints = []
    for x, y in locs:
        a, b = hint_color_from_image(img, (x, y), size)
        hints.append(Hint(x=x, y=y, a=a, b=b, size=size))
    return hints


def encode_hints(hints: list[Hint], width: int, height: int) -> HintPlanes:
    """Rasterize hints; overlapping footprints keep the later hint's color."""
    a_plane = np.zeros((height, width), dtype=np.float64)
    b_plane = np.zeros((height, width), dtype=np.float64)
    mask = np.zeros((height, width), dtype=np.float64)
    for h in hints:
        h.validate(width, height)
        ys, xs = slice(h.y, h.y + h.size), slice(h.x, h.x + h.size)
        a_plane[ys, xs] = h.a
        b_plane[ys, xs] = h.b
        mask[ys, xs] = 1.0
    return HintPlanes(width=width, height=height, a_plane=a_plane, b_plane=b_plane, mask=mask)


def build_model_input(L: np.ndarray, hp: HintPlanes) -> np.ndarray:
    """Concatenate normalized L with normalized hint chroma and the raw mask.

    Returns the (H, W, 4) network input. The mask channel is not rescaled.
    """
    L = np.asarray(L, dtype=np.float64)
    if L.shape != (hp.height, hp.width):
        raise ValueError(
            f"L plane shape {L.shape} does not match hint planes "
            f"({hp.height}, {hp.width})"
        )
    return np.stack(
        [
            normalize_l(L),
            normalize_ab(hp.a_plane),
            normalize_ab(hp.b_plane),
            hp.mask.astype(np.float64),
        ],
        axis=-1,
    )


def hints_to_json(hints: list[Hint]) -> str:
    """Serialize hints to the interchange format used by the CLI and service."""
    return json.dumps(
        [{"x": h.x, "y": h.y, "size": h.size, "a": h.a, "b": h.b} for h in hints],
        indent=2,
    )


def hints_from_json(text: str) -> list[Hint]:
    """Parse the hints interchange format.

    Each entry carries either explicit {"a", "b"} chroma or an {"rgb": [r, g, b]}
    color that is converted through Lab of the solid color.
    """
    raw = json.loads(text)
    if not isinstance(raw, list):
        raise ValueError("hints file must contain a JSON array")
    hints = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise ValueError(f"hint entry {i} is not an object")
        try:
            x, y = int(entry["x"]), int(entry["y"])
        except KeyError as exc:
            raise ValueError(f"hint entry {i} missing field {exc}") from exc
        size = int(entry.get("size", 2))
        if "rgb" in entry:
            rgb = entry["rgb"]
            if len(rgb) != 3:
                raise ValueError(f"hint entry {i}: rgb must have 3 components")
            lab = rgb_array_to_lab(np.array(rgb, dtype=np.float64))
            a, b = float(lab[1]), float(lab[2])
        else:
            try:
                a, b = float(entry["a"]), float(entry["b"])
            except KeyError:
                raise ValueError(f"hint entry {i} needs either a/b or rgb") from None
        hints.append(Hint(x=x, y=y, a=a, b=b, size=size))
    return hints
