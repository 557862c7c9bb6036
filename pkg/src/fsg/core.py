"""Shared domain types and pose arithmetic.

Conventions used throughout the package:

* Images are ``float32`` rasters of shape ``(H, W, C)`` with values in
  ``[0, 1]``, row-major, channel-interleaved.  8-bit I/O converts via
  ``value / 255`` on read and round-half-to-even on write.
* Landmarks are ``(x, y)`` pixel coordinates where integer coordinates sit on
  pixel centers: column ``j`` / row ``i`` has center ``(x=j, y=i)``.
* Angles are degrees everywhere.  Euler poses are intrinsic yaw-pitch-roll
  (yaw about the vertical axis, then pitch, then roll about the view axis) and
  are normalized to ``[-180, 180)`` at construction.
* Segmentation masks label each pixel background (0), face (1) or hair (2).

All types freeze their numpy buffers after validation and are safe to share
between threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError

BACKGROUND = 0
FACE = 1
HAIR = 2

DEFAULT_LANDMARK_COUNT = 70


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _wrap_degrees(angle: float) -> float:
    """Wrap into the canonical [-180, 180) range."""
    wrapped = (float(angle) + 180.0) % 360.0 - 180.0
    return wrapped


@dataclass(frozen=True)
class Image:
    """Floating-point raster in [0, 1], shape (H, W, C) with C in {1, 3}."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ValidationError(f"image must be (H, W, 1|3), got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError("image must have at least one pixel")
        if not np.isfinite(arr).all():
            raise ValidationError("image contains NaN or Inf samples")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValidationError("image samples must lie in [0, 1]")
        object.__setattr__(self, "data", _frozen(np.ascontiguousarray(arr)))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @classmethod
    def full(cls, height: int, width: int, value=0.0, channels: int = 3) -> "Image":
        return cls(np.full((height, width, channels), value, dtype=np.float32))


@dataclass(frozen=True)
class LandmarkSet:
    """Ordered 2D facial landmarks, (N, 2) float64 pixel coordinates."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValidationError(f"landmarks must be (N, 2), got {pts.shape}")
        if pts.shape[0] < 3:
            raise ValidationError("a landmark set needs at least 3 points")
        if not np.isfinite(pts).all():
            raise ValidationError("landmark coordinates must be finite")
        object.__setattr__(self, "points", _frozen(np.ascontiguousarray(pts)))

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class Landmark3DSet:
    """Ordered 3D landmarks in a camera-aligned frame, (N, 3) float64."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValidationError(f"3D landmarks must be (N, 3), got {pts.shape}")
        if pts.shape[0] < 3:
            raise ValidationError("a landmark set needs at least 3 points")
        if not np.isfinite(pts).all():
            raise ValidationError("landmark coordinates must be finite")
        object.__setattr__(self, "points", _frozen(np.ascontiguousarray(pts)))

    def __len__(self) -> int:
        return self.points.shape[0]

    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)


@dataclass(frozen=True)
class EulerPose:
    """Head orientation as yaw/pitch/roll degrees, canonical [-180, 180)."""

    yaw: float
    pitch: float
    roll: float

    def __post_init__(self):
        for name in ("yaw", "pitch", "roll"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ValidationError(f"pose {name} must be finite")
            object.__setattr__(self, name, _wrap_degrees(value))

    def as_array(self) -> np.ndarray:
        return np.array([self.yaw, self.pitch, self.roll], dtype=np.float64)


@dataclass(frozen=True)
class PlanePoint:
    """A pose projected onto the (yaw, pitch) plane; roll is gone."""

    yaw: float
    pitch: float

    def __post_init__(self):
        if not (np.isfinite(self.yaw) and np.isfinite(self.pitch)):
            raise ValidationError("plane point must be finite")
        object.__setattr__(self, "yaw", float(self.yaw))
        object.__setattr__(self, "pitch", float(self.pitch))

    def as_array(self) -> np.ndarray:
        return np.array([self.yaw, self.pitch], dtype=np.float64)


@dataclass(frozen=True)
class SegMask:
    """Per-pixel class labels: background=0, face=1, hair=2."""

    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 2:
            raise ValidationError(f"mask labels must be (H, W), got {lab.shape}")
        lab = lab.astype(np.uint8, casting="unsafe")
        if not np.array_equal(lab, np.asarray(self.labels)):
            raise ValidationError("mask labels must be integers")
        if lab.max(initial=0) > HAIR:
            raise ValidationError("mask labels must be in {0, 1, 2}")
        object.__setattr__(self, "labels", _frozen(np.ascontiguousarray(lab)))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def class_mask(self, label: int) -> np.ndarray:
        return self.labels == label

    @classmethod
    def full(cls, height: int, width: int, label: int = FACE) -> "SegMask":
        return cls(np.full((height, width), label, dtype=np.uint8))


def pose_to_plane(pose: EulerPose) -> PlanePoint:
    """Project a pose onto the (yaw, pitch) plane by dropping the roll angle."""
    return PlanePoint(pose.yaw, pose.pitch)


def rotation_matrix(pose: EulerPose) -> np.ndarray:
    """3x3 rotation for an intrinsic yaw-pitch-roll pose.

    Axes follow image conventions: x right, y down, z away from the camera.
    Yaw turns about y, pitch about x, roll about z.
    """
    y, p, r = np.radians([pose.yaw, pose.pitch, pose.roll])
    cy, sy = np.cos(y), np.sin(y)
    cp, sp = np.cos(p), np.sin(p)
    cr, sr = np.cos(r), np.sin(r)
    ry = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]])
    rz = np.array([[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]])
    return ry @ rx @ rz


def angular_distance(a: PlanePoint, b: PlanePoint) -> float:
    """Euclidean distance between two points of the (yaw, pitch) plane."""
    return float(np.hypot(a.yaw - b.yaw, a.pitch - b.pitch))


def one_hot(mask: SegMask, classes: int = 3) -> np.ndarray:
    """Expand a label mask to a (H, W, classes) one-hot float64 array."""
    out = np.zeros(mask.labels.shape + (classes,), dtype=np.float64)
    for c in range(classes):
        out[:, :, c] = mask.labels == c
    return out


def require_same_shape(a: np.ndarray, b: np.ndarray, what: str = "rasters") -> None:
    if a.shape != b.shape:
        raise ValidationError(f"{what} must share dimensions: {a.shape} vs {b.shape}")


def check_landmark_counts(a: Sequence, b: Sequence) -> None:
    if len(a) != len(b):
        raise ValidationError(
            f"landmark counts differ: {len(a)} vs {len(b)}"
        )
