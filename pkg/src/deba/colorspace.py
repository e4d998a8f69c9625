"""Image container, 8-bit quantization, and RGB <-> YUV conversion.

YUV here is the BT.601 analog form with a +0.5 offset on both chroma
planes, so every plane of an in-gamut image stays inside [0, 1]::

    Y = 0.299 R + 0.587 G + 0.114 B
    U = 0.492 (B - Y) + 0.5
    V = 0.877 (R - Y) + 0.5
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import InvalidInput

Space = Literal["RGB", "YUV", "GRAY"]

_KR, _KG, _KB = 0.299, 0.587, 0.114
_U_SCALE, _V_SCALE = 0.492, 0.877


@dataclass(frozen=True, eq=False)
class ImageTensor:
    """Channel-planar image: ``planes`` has shape (channels, height, width)."""

    planes: np.ndarray
    space: Space = "RGB"

    def __post_init__(self):
        p = np.asarray(self.planes, dtype=np.float64)
        if p.ndim == 2:
            p = p[None]
        if p.ndim != 3 or p.shape[1] < 1 or p.shape[2] < 1:
            raise InvalidInput(f"planes must be (C, H, W), got {p.shape}")
        expected = 1 if self.space == "GRAY" else 3
        if self.space not in ("RGB", "YUV", "GRAY"):
            raise InvalidInput(f"unknown color space {self.space!r}")
        if p.shape[0] != expected:
            raise InvalidInput(f"{self.space} image needs {expected} planes, got {p.shape[0]}")
        object.__setattr__(self, "planes", p)

    @property
    def channels(self) -> int:
        return self.planes.shape[0]

    @property
    def height(self) -> int:
        return self.planes.shape[1]

    @property
    def width(self) -> int:
        return self.planes.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.planes.shape

    def to_uint8(self) -> np.ndarray:
        return quantize_levels(self.planes)

    @classmethod
    def from_uint8(cls, levels: np.ndarray, space: Space = "RGB") -> "ImageTensor":
        return cls(np.asarray(levels, dtype=np.float64) / 255.0, space)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ImageTensor):
            return NotImplemented
        return self.space == other.space and np.array_equal(self.planes, other.planes)

    __hash__ = None  # type: ignore[assignment]


def quantize_levels(values: np.ndarray) -> np.ndarray:
    """round(clamp(v, 0, 1) * 255) as uint8, rounding halves upward."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.floor(v * 255.0 + 0.5).astype(np.uint8)


def quantize(img: ImageTensor) -> ImageTensor:
    """Snap an image onto the 8-bit grid (values stay in [0, 1])."""
    return ImageTensor.from_uint8(img.to_uint8(), img.space)


def rgb_to_yuv(img: ImageTensor) -> ImageTensor:
    if img.space != "RGB":
        raise InvalidInput(f"rgb_to_yuv expects an RGB image, got {img.space}")
    r, g, b = img.planes
    # difference form: achromatic pixels give exactly Y = R and U = V = 0.5
    y = g + _KR * (r - g) + _KB * (b - g)
    u = _U_SCALE * (_KR * (b - r) + _KG * (b - g)) + 0.5
    v = _V_SCALE * (_KG * (r - g) + _KB * (r - b)) + 0.5
    return ImageTensor(np.stack([y, u, v]), "YUV")


def yuv_to_rgb(img: ImageTensor) -> ImageTensor:
    """Exact inverse of :func:`rgb_to_yuv`; no clamping happens here."""
    if img.space != "YUV":
        raise InvalidInput(f"yuv_to_rgb expects a YUV image, got {img.space}")
    y, u, v = img.planes
    b_minus_y = (u - 0.5) / _U_SCALE
    r_minus_y = (v - 0.5) / _V_SCALE
    r = y + r_minus_y
    b = y + b_minus_y
    g = y - (_KR * r_minus_y + _KB * b_minus_y) / _KG
    return ImageTensor(np.stack([r, g, b]), "RGB")
