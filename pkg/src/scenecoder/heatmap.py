"""Per-detection Gaussian heatmaps and binary PGM output.

Each box contributes an elliptical Gaussian over the whole image in pixel
units: peak 1/(pi*sqrt(w*h)) at the box center, scale w (resp. h) along x
(resp. y). Per-scene maps are the pointwise sum of box fields, normalized
to a maximum of 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class HeatField:
    width: int
    height: int
    values: np.ndarray  # (height, width) float64, row-major


def box_heatmap(x: float, y: float, w: float, h: float,
                width: int, height: int) -> HeatField:
    """Gaussian field for one pixel-space box (top-left corner x, y)."""
    if width <= 0 or height <= 0:
        raise ValueError(f"non-positive image size: {width}x{height}")
    if w <= 0 or h <= 0:
        raise ValueError(f"zero-area box: w={w} h={h}")
    x0 = x + w / 2.0
    y0 = y + h / 2.0
    xs = np.arange(width, dtype=np.float64)
    ys = np.arange(height, dtype=np.float64)
    ex = np.exp(-2.0 * ((xs - x0) ** 2) / (w * w))
    ey = np.exp(-2.0 * ((ys - y0) ** 2) / (h * h))
    values = (ey[:, None] * ex[None, :]) / (math.pi * math.sqrt(w * h))
    values.flags.writeable = False
    return HeatField(width=width, height=height, values=values)


def overlay_normalize(fields: Sequence[HeatField]) -> HeatField:
    """Pointwise sum scaled so the maximum is 1; all-zero stays all-zero."""
    if not fields:
        raise ValueError("no fields to overlay")
    width, height = fields[0].width, fields[0].height
    for f in fields[1:]:
        if f.width != width or f.height != height:
            raise ValueError(
                f"dimension mismatch: {f.width}x{f.height} vs {width}x{height}"
            )
    total = np.zeros((height, width), dtype=np.float64)
    for f in fields:
        total += f.values
    peak = total.max()
    if peak > 0:
        total /= peak
    total.flags.writeable = False
    return HeatField(width=width, height=height, values=total)


def write_pgm(field: HeatField, path: str) -> None:
    """8-bit binary PGM (P5); values must be in [0, 1]."""
    values = field.values
    if values.min() < 0.0 or values.max() > 1.0:
        raise ValueError("field values must be in [0, 1] for PGM output")
    header = f"P5\n{field.width} {field.height}\n255\n".encode("ascii")
    data = np.round(values * 255.0).astype(np.uint8).tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data)


def read_pgm(path: str) -> HeatField:
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"P5":
            raise ValueError(f"not a binary PGM: magic={magic!r}")
        dims = fh.readline().split()
        width, height = int(dims[0]), int(dims[1])
        maxval = int(fh.readline())
        data = np.frombuffer(fh.read(width * height), dtype=np.uint8)
    values = data.reshape(height, width).astype(np.float64) / maxval
    values.flags.writeable = False
    return HeatField(width=width, height=height, values=values)
