"""Segmentation-mask utilities: coverage statistics, background removal, and
ellipse occlusion augmentation for inpainting-style training data.

Bounding boxes are ``(row_start, col_start, row_stop, col_stop)`` half-open.
Ellipse rasterization is center-in: a pixel belongs to an ellipse iff its
center satisfies the ellipse inequality, keeping pixel counts integral.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BACKGROUND, FACE, Image, SegMask
from .errors import ValidationError


@dataclass(frozen=True)
class OcclusionSpec:
    """Randomized border occlusions: ``count`` ellipses with semi-major axes
    drawn as a fraction of the face bounding box's longer side."""

    count: tuple[int, int] = (1, 3)
    semi_axis: tuple[float, float] = (0.05, 0.25)
    aspect: tuple[float, float] = (0.3, 1.0)
    seed: int = 0

    def __post_init__(self):
        if self.count[0] > self.count[1] or self.count[0] < 0:
            raise ValidationError(f"bad ellipse count range {self.count}")
        for name in ("semi_axis", "aspect"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise ValidationError(f"bad {name} range ({lo}, {hi})")


@dataclass(frozen=True)
class Ellipse:
    center: tuple[float, float]  # (row, col)
    semi_major: float
    semi_minor: float
    angle: float  # radians

    def contains(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        dy = rows - self.center[0]
        dx = cols - self.center[1]
        ca, sa = np.cos(self.angle), np.sin(self.angle)
        u = dx * ca + dy * sa
        v = -dx * sa + dy * ca
        return (u / self.semi_major) ** 2 + (v / self.semi_minor) ** 2 <= 1.0


def coverage_ratio(mask: SegMask, bbox: tuple[int, int, int, int], label: int = FACE) -> float:
    """Fraction of bbox pixels carrying ``label``."""
    r0, c0, r1, c1 = bbox
    if not (0 <= r0 < r1 <= mask.height and 0 <= c0 < c1 <= mask.width):
        raise ValidationError(f"bbox {bbox} empty or outside the {mask.height}x{mask.width} raster")
    window = mask.labels[r0:r1, c0:c1]
    return float((window == label).sum()) / float(window.size)


def remove_background(img: Image, mask: SegMask, keep=(FACE,)) -> Image:
    """Zero out every pixel whose label is not in ``keep``."""
    if img.data.shape[:2] != mask.labels.shape:
        raise ValidationError(
            f"image {img.data.shape[:2]} and mask {mask.labels.shape} dimensions differ"
        )
    keep_mask = np.isin(mask.labels, np.asarray(list(keep), dtype=np.uint8))
    out = np.where(keep_mask[:, :, None], img.data, np.float32(0.0))
    return Image(out)


def face_bbox(mask: SegMask, label: int = FACE) -> tuple[int, int, int, int]:
    ys, xs = np.nonzero(mask.labels == label)
    if ys.size == 0:
        raise ValidationError("mask has no pixels of the requested class")
    return int(ys.min()), int(xs.min()), int(ys.max()) + 1, int(xs.max()) + 1


def boundary_pixels(mask: SegMask, label: int = FACE) -> np.ndarray:
    """(row, col) pairs of ``label`` pixels 4-adjacent to any other class
    (pixels beyond the raster count as background)."""
    region = mask.labels == label
    padded = np.pad(region, 1, constant_values=False)
    interior = (
        padded[:-2, 1:-1]
        & padded[2:, 1:-1]
        & padded[1:-1, :-2]
        & padded[1:-1, 2:]
    )
    border = region & ~interior
    ys, xs = np.nonzero(border)
    return np.stack([ys, xs], axis=1)


def sample_ellipses(mask: SegMask, spec: OcclusionSpec, rng=None) -> list[Ellipse]:
    """Draw the ellipse parameters ``occlude_border`` will rasterize.

    Deterministic for a fixed spec/seed; exposed so tests and callers can
    re-rasterize the exact same shapes independently.
    """
    border = boundary_pixels(mask, FACE)
    if border.shape[0] == 0:
        raise ValidationError("occlusion augmentation needs a non-empty face region")
    r0, c0, r1, c1 = face_bbox(mask, FACE)
    max_side = float(max(r1 - r0, c1 - c0))

    if rng is None:
        rng = np.random.default_rng(spec.seed)
    count = int(rng.integers(spec.count[0], spec.count[1] + 1))
    ellipses = []
    for _ in range(count):
        center = border[int(rng.integers(0, border.shape[0]))]
        a = float(rng.uniform(*spec.semi_axis)) * max_side
        b = a * float(rng.uniform(*spec.aspect))
        angle = float(rng.uniform(0.0, np.pi))
        ellipses.append(
            Ellipse(center=(float(center[0]), float(center[1])), semi_major=a, semi_minor=b, angle=angle)
        )
    return ellipses


def occlude_border(mask: SegMask, spec: OcclusionSpec, rng=None) -> SegMask:
    """Knock ellipse-shaped bites out of the face border, labeling them
    background.  Never adds face pixels; identical output for a fixed seed."""
    ellipses = sample_ellipses(mask, spec, rng)
    labels = mask.labels.copy()
    if ellipses:
        rows, cols = np.mgrid[0 : mask.height, 0 : mask.width]
        rows = rows.astype(np.float64)
        cols = cols.astype(np.float64)
        for e in ellipses:
            inside = e.contains(rows, cols)
            labels[inside & (labels == FACE)] = BACKGROUND
    return SegMask(labels)
