"""Landmark heatmap encoding/decoding.

A landmark set renders to one channel per point: an unnormalized Gaussian
``exp(-((x - px)^2 + (y - py)^2) / (2 * sigma^2))`` evaluated at pixel
centers, so a landmark sitting exactly on a pixel center peaks at 1.0 there.
Off-frame landmarks keep their (tiny) in-frame tail instead of being zeroed,
which avoids a discontinuity as points cross the frame edge.

The per-axis distances are computed relative to ``floor(coordinate)`` so that
shifting all landmarks by an integer offset shifts every channel bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .core import LandmarkSet
from .errors import ValidationError


@dataclass(frozen=True)
class Heatmap:
    """Per-landmark Gaussian channels, float32 of shape (N, H, W)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 3:
            raise ValidationError(f"heatmap must be (N, H, W), got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


def default_sigma(height: int, width: int) -> float:
    """Kernel width scaling with resolution: 4 px at 256."""
    return max(height, width) / 64.0


def encode_landmarks(
    landmarks: LandmarkSet,
    height: int,
    width: int,
    sigma: float | None = None,
    kernel: str = "gaussian",
) -> Heatmap:
    """Render one kernel channel per landmark.

    ``kernel`` is ``"gaussian"`` (default) or ``"disk"`` (binary disk of
    radius sigma, for pipelines that expect hard activations).
    """
    if height < 1 or width < 1:
        raise ValidationError("heatmap dimensions must be >= 1")
    if sigma is None:
        sigma = default_sigma(height, width)
    if not sigma > 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    if kernel not in ("gaussian", "disk"):
        raise ValidationError(f"unknown heatmap kernel {kernel!r}")

    out = np.empty((len(landmarks), height, width), dtype=np.float32)
    cols = np.arange(width, dtype=np.int64)
    rows = np.arange(height, dtype=np.int64)
    inv = 1.0 / (2.0 * sigma * sigma)
    for k, (px, py) in enumerate(landmarks.points):
        # Integer-grid offsets relative to floor() keep integer translations
        # of the landmark bitwise-equal to translations of the channel.
        bx, by = math.floor(px), math.floor(py)
        dx = (cols - bx).astype(np.float64) - (px - bx)
        dy = (rows - by).astype(np.float64) - (py - by)
        d2 = dy[:, None] ** 2 + dx[None, :] ** 2
        if kernel == "gaussian":
            out[k] = np.exp(-d2 * inv)
        else:
            out[k] = d2 <= sigma * sigma
    return Heatmap(out)


def decode_landmarks(heatmap: Heatmap) -> LandmarkSet:
    """Recover subpixel peak positions, the inverse of the Gaussian encoder.

    Uses the channel argmax plus a per-axis parabolic fit on log-values;
    exact for noiseless Gaussian channels whose peak is interior.
    """
    pts = np.empty((heatmap.channels, 2), dtype=np.float64)
    for k in range(heatmap.channels):
        chan = heatmap.data[k].astype(np.float64)
        idx = np.argmax(chan)
        iy, ix = np.unravel_index(idx, chan.shape)
        pts[k, 0] = ix + _parabolic_offset(chan[iy, :], ix)
        pts[k, 1] = iy + _parabolic_offset(chan[:, ix], iy)
    return LandmarkSet(pts)


def _parabolic_offset(line: np.ndarray, i: int) -> float:
    if i <= 0 or i >= line.size - 1:
        return 0.0
    triple = line[i - 1 : i + 2]
    if np.any(triple <= 0):
        return 0.0
    lm, l0, lp = np.log(triple)
    denom = lm - 2.0 * l0 + lp
    if denom >= 0:
        return 0.0
    return float(0.5 * (lm - lp) / denom)
