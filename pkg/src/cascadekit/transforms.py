"""Input representations: channel selection/mixing plus resizing.

A transform is (width, height, color mode).  Channel reduction happens
first, then bilinear resampling with half-pixel centers; values are
rounded half-up back to bytes only after interpolation.  Two models
share an input representation exactly when their transforms have equal
representation keys.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

import numpy as np

from .corpus import ImageRecord
from .errors import ValidationError

# BT.601 luma weights
_GRAY_WEIGHTS = (0.299, 0.587, 0.114)


class ColorMode(Enum):
    FULL_RGB = "FULL_RGB"
    RED = "RED"
    GREEN = "GREEN"
    BLUE = "BLUE"
    GRAY = "GRAY"


@dataclass(frozen=True)
class TransformSpec:
    width: int
    height: int
    color_mode: ColorMode


def representation_key(spec: TransformSpec) -> str:
    """Stable identity of the produced representation, e.g. '60x60:RED'."""
    return f"{spec.width}x{spec.height}:{spec.color_mode.value}"


def input_value_count(spec: TransformSpec) -> int:
    """Number of scalar input values a model with this transform consumes."""
    channels = 3 if spec.color_mode is ColorMode.FULL_RGB else 1
    return spec.width * spec.height * channels


def _reduce_channels(record: ImageRecord, mode: ColorMode) -> np.ndarray:
    planes = record.plane_array().astype(np.float64)
    if record.channels == 1:
        if mode is ColorMode.GRAY:
            return planes
        raise ValidationError(
            f"image {record.id} has 1 channel; only GRAY transforms apply"
        )
    if record.channels != 3:
        raise ValidationError(f"image {record.id}: unsupported channel count {record.channels}")
    if mode is ColorMode.FULL_RGB:
        return planes
    if mode is ColorMode.RED:
        return planes[0:1]
    if mode is ColorMode.GREEN:
        return planes[1:2]
    if mode is ColorMode.BLUE:
        return planes[2:3]
    w = _GRAY_WEIGHTS
    luma = w[0] * planes[0] + w[1] * planes[1] + w[2] * planes[2]
    # luma is rounded to a byte before any resampling
    return np.floor(luma + 0.5)[None, :, :]


def _axis_coords(out_n: int, in_n: int):
    # half-pixel centers, clamped so edge samples repeat the border row/col
    src = (np.arange(out_n, dtype=np.float64) + 0.5) * (in_n / out_n) - 0.5
    src = np.clip(src, 0.0, in_n - 1.0)
    lo = np.floor(src).astype(np.int64)
    hi = np.minimum(lo + 1, in_n - 1)
    frac = src - lo
    return lo, hi, frac


def _bilinear(plane: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    in_h, in_w = plane.shape
    y0, y1, fy = _axis_coords(out_h, in_h)
    x0, x1, fx = _axis_coords(out_w, in_w)
    top = plane[y0][:, x0] * (1.0 - fx)[None, :] + plane[y0][:, x1] * fx[None, :]
    bot = plane[y1][:, x0] * (1.0 - fx)[None, :] + plane[y1][:, x1] * fx[None, :]
    return top * (1.0 - fy)[:, None] + bot * fy[:, None]


def apply_transform(record: ImageRecord, spec: TransformSpec) -> np.ndarray:
    """Produce the model input for an image as a (C, H, W) uint8 array."""
    if spec.width <= 0 or spec.height <= 0:
        raise ValidationError("transform dimensions must be positive")
    reduced = _reduce_channels(record, spec.color_mode)
    out = np.empty((reduced.shape[0], spec.height, spec.width), dtype=np.float64)
    for c in range(reduced.shape[0]):
        out[c] = _bilinear(reduced[c], spec.height, spec.width)
    return np.clip(np.floor(out + 0.5), 0.0, 255.0).astype(np.uint8)


def transform_grid(sizes: Iterable[tuple[int, int]],
                   modes: Iterable[ColorMode]) -> list[TransformSpec]:
    """Cross sizes with color modes, size-major, preserving given order."""
    return [TransformSpec(w, h, m) for (w, h) in sizes for m in modes]
