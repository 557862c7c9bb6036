"""Dataset curation: frame pruning and per-subject frame budgeting.

Frames are dropped when the face covers too little of its bounding box
(strictly below the threshold), when flagged as motion-blurred, and when they
crowd each other in the angular domain.  A per-subject cap keeps the frames
whose 2D landmarks spread the most, via deterministic greedy farthest-point
selection (a 2-approximation to exact max-min dispersion; documented
approximation, chosen for determinism and near-linear cost).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .appearance import DEFAULT_PRUNE_RADIUS, prune_views
from .core import LandmarkSet, PlanePoint
from .errors import ValidationError

DEFAULT_COVERAGE_MIN = 0.15
DEFAULT_FRAME_CAP = 100


@dataclass(frozen=True)
class FrameRecord:
    frame_id: str
    point: PlanePoint
    roll: float
    blur: float | None
    coverage: float
    landmarks: LandmarkSet | None = None

    def __post_init__(self):
        if not 0.0 <= self.coverage <= 1.0:
            raise ValidationError(
                f"frame {self.frame_id}: coverage {self.coverage} outside [0, 1]"
            )


def prune_frames(
    frames: list[FrameRecord],
    coverage_min: float = DEFAULT_COVERAGE_MIN,
    prune_radius: float = DEFAULT_PRUNE_RADIUS,
    blur_threshold: float | None = None,
) -> list[FrameRecord]:
    """Coverage filter, blur filter, then angular-domain radius pruning.

    Coverage strictly below ``coverage_min`` drops the frame; an exact-
    threshold frame stays.  Returns survivors in input order.
    """
    if not 0.0 <= coverage_min <= 1.0:
        raise ValidationError(f"coverage_min {coverage_min} outside [0, 1]")
    kept = [
        f
        for f in frames
        if f.coverage >= coverage_min
        and not (blur_threshold is not None and f.blur is not None and f.blur > blur_threshold)
    ]
    retained = prune_views(
        [(f.point, f.roll, None) for f in kept],
        radius=prune_radius,
    )
    return [kept[i] for i in retained]


def select_max_variance(frames: list[FrameRecord], cap: int = DEFAULT_FRAME_CAP) -> list[FrameRecord]:
    """Keep at most ``cap`` frames, spreading 2D landmark configurations.

    Greedy farthest-point: seed with the pair of frames at maximum landmark
    distance, then repeatedly add the frame maximizing its minimum distance
    to the selected set.  Ties resolve to the lowest frame index.  Output
    preserves input order.
    """
    if cap < 1:
        raise ValidationError(f"frame cap must be >= 1, got {cap}")
    if len(frames) <= cap:
        return list(frames)
    for f in frames:
        if f.landmarks is None:
            raise ValidationError(f"frame {f.frame_id} lacks landmarks for selection")

    vectors = np.stack([f.landmarks.points.ravel() for f in frames])
    dists = np.sqrt(((vectors[:, None, :] - vectors[None, :, :]) ** 2).sum(axis=2))

    n = len(frames)
    i, j = divmod(int(np.argmax(dists)), n)
    selected = [min(i, j), max(i, j)] if cap >= 2 else [min(i, j)]
    chosen = set(selected)
    while len(selected) < cap:
        best_idx, best_score = -1, -1.0
        for k in range(n):
            if k in chosen:
                continue
            score = min(dists[k, s] for s in selected)
            if score > best_score:
                best_idx, best_score = k, score
        selected.append(best_idx)
        chosen.add(best_idx)
    return [frames[k] for k in sorted(chosen)]
