"""sRGB <-> CIELab conversion and channel handling for the colorization pipeline.

All conversions assume sRGB primaries with the D65 white point and the
standard sRGB transfer function. Chroma planes are normalized for the
network by dividing by 110, which keeps the empirical sRGB ab gamut
close to [-1, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# sRGB -> XYZ matrix (D65, 2 degree observer), IEC 61966-2-1 primaries.
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)

# D65 reference white, derived from the matrix row sums so the gray axis
# maps to exactly zero chroma (matches the tabulated (0.95047, 1, 1.08883)
# to 7 decimals).
_WHITE = _RGB_TO_XYZ @ np.ones(3)

# CIE f(t) knee constants.
_DELTA = 6.0 / 29.0
_DELTA3 = _DELTA**3

# Divisor keeping normalized ab near [-1, 1] over the sRGB gamut.
AB_NORM = 110.0


@dataclass
class RgbImage:
    """8-bit sRGB image, pixel data shaped (height, width, 3)."""

    width: int
    height: int
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.dtype != np.uint8:
            raise ValueError(f"rgb data must be uint8, got {self.data.dtype}")
        if self.data.shape != (self.height, self.width, 3):
            raise ValueError(
                f"rgb data shape {self.data.shape} does not match "
                f"(height={self.height}, width={self.width}, 3)"
            )

    @classmethod
    def from_array(cls, arr) -> "RgbImage":
        arr = np.asarray(arr)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) array, got shape {arr.shape}")
        return cls(width=arr.shape[1], height=arr.shape[0], data=arr)


@dataclass
class LabImage:
    """CIELab image stored as separate L, a, b planes shaped (height, width)."""

    width: int
    height: int
    L: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        for name in ("L", "a", "b"):
            plane = np.asarray(getattr(self, name), dtype=np.float64)
            if plane.shape != (self.height, self.width):
                raise ValueError(
                    f"{name} plane shape {plane.shape} does not match "
                    f"(height={self.height}, width={self.width})"
                )
            setattr(self, name, plane)

    def ab_stack(self) -> np.ndarray:
        """Chroma planes stacked as (H, W, 2)."""
        return np.stack([self.a, self.b], axis=-1)


def _srgb_linearize(c: np.ndarray) -> np.ndarray:
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _srgb_delinearize(c: np.ndarray) -> np.ndarray:
    c = np.clip(c, 0.0, None)
    return np.where(c <= 0.0031308, 12.92 * c, 1.055 * c ** (1.0 / 2.4) - 0.055)


def _lab_f(t: np.ndarray) -> np.ndarray:
    return np.where(t > _DELTA3, np.cbrt(t), t / (3.0 * _DELTA**2) + 4.0 / 29.0)


def _lab_f_inv(f: np.ndarray) -> np.ndarray:
    return np.where(f > _DELTA, f**3, 3.0 * _DELTA**2 * (f - 4.0 / 29.0))


def rgb_to_lab(img: RgbImage) -> LabImage:
    """Convert an 8-bit sRGB image to CIELab (D65)."""
    lab = rgb_array_to_lab(img.data)
    return LabImage(
        width=img.width,
        height=img.height,
        L=lab[..., 0],
        a=lab[..., 1],
        b=lab[..., 2],
    )


def rgb_array_to_lab(rgb: np.ndarray) -> np.ndarray:
    """Vectorized sRGB (0..255) -> Lab for an (..., 3) array."""
    srgb = np.asarray(rgb, dtype=np.float64) / 255.0
    lin = _srgb_linearize(srgb)
    xyz = lin @ _RGB_TO_XYZ.T
    f = _lab_f(xyz / _WHITE)
    out = np.empty_like(f)
    out[..., 0] = 116.0 * f[..., 1] - 16.0
    out[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    out[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return out


def lab_to_rgb(img: LabImage) -> RgbImage:
    """Convert CIELab back to 8-bit sRGB, clamping out-of-gamut channels."""
    lab = np.stack([img.L, img.a, img.b], axis=-1)
    rgb = lab_array_to_rgb(lab)
    return RgbImage(width=img.width, height=img.height, data=rgb)


def lab_array_to_rgb(lab: np.ndarray) -> np.ndarray:
    """Vectorized Lab -> sRGB uint8 for an (..., 3) array, clamped per channel."""
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    f = np.stack([fx, fy, fz], axis=-1)
    xyz = _lab_f_inv(f) * _WHITE
    lin = xyz @ _XYZ_TO_RGB.T
    srgb = _srgb_delinearize(lin)
    return np.clip(np.rint(srgb * 255.0), 0, 255).astype(np.uint8)


def extract_grayscale(img: LabImage) -> np.ndarray:
    """Return the L plane (the network's grayscale input), shape (H, W)."""
    return img.L.copy()


def normalize_l(L: np.ndarray) -> np.ndarray:
    """L in [0, 100] -> [0, 1]."""
    return np.asarray(L, dtype=np.float64) / 100.0


def denormalize_l(L: np.ndarray) -> np.ndarray:
    return np.asarray(L, dtype=np.float64) * 100.0


def normalize_ab(ab: np.ndarray) -> np.ndarray:
    """Chroma values -> roughly [-1, 1] via the fixed divisor."""
    return np.asarray(ab, dtype=np.float64) / AB_NORM


def denormalize_ab(ab: np.ndarray) -> np.ndarray:
    return np.asarray(ab, dtype=np.float64) * AB_NORM


def normalize_for_net(L: np.ndarray, a: np.ndarray, b: np.ndarray):
    """Scale Lab planes to network range: L/100, a/110, b/110."""
    return normalize_l(L), normalize_ab(a), normalize_ab(b)


def denormalize_for_net(L: np.ndarray, a: np.ndarray, b: np.ndarray):
    """Exact inverse of :func:`normalize_for_net`."""
    return denormalize_l(L), denormalize_ab(a), denormalize_ab(b)
