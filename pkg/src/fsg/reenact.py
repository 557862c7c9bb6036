"""Stepwise reenactment planning and expression transfer.

Large pose changes are broken into small steps: Euler angles and the 3D
landmark centroid are linearly interpolated from source to target, the rigid
source landmark shape is re-posed at each step and projected orthographically
(drop z after rotation), and a recurrent generator is driven through the
resulting landmark sequence.  The source's non-rigid deformation stays fixed
along the way; callers may substitute the target's own 2D landmarks for the
final step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .core import (
    EulerPose,
    Image,
    Landmark3DSet,
    LandmarkSet,
    SegMask,
    rotation_matrix,
)
from .appearance import angular_gap
from .errors import PipelineError, ValidationError
from .heatmaps import encode_landmarks

DEFAULT_STEP_BUDGET = 15.0
DEFAULT_MOUTH_RANGE = range(48, 68)
DEFAULT_MOUTH_ANCHORS = (48, 54)


@dataclass(frozen=True)
class ReenactPlan:
    """Landmark trajectory p_1..p_n plus the pose samples that produced it."""

    steps: tuple[LandmarkSet, ...]
    poses: tuple[EulerPose, ...]
    ts: tuple[float, ...]
    source_pose: EulerPose
    target_pose: EulerPose

    @property
    def n(self) -> int:
        return len(self.steps)


def auto_step_count(e_s: EulerPose, e_t: EulerPose, step_budget: float = DEFAULT_STEP_BUDGET) -> int:
    """ceil(planar angular gap / budget), at least one step."""
    if not step_budget > 0:
        raise ValidationError(f"step budget must be positive, got {step_budget}")
    return max(1, math.ceil(angular_gap(e_s, e_t) / step_budget))


def plan_steps(
    v_s: Landmark3DSet,
    e_s: EulerPose,
    v_t: Landmark3DSet,
    e_t: EulerPose,
    n: int | None = None,
    step_budget: float = DEFAULT_STEP_BUDGET,
    final_landmarks: LandmarkSet | None = None,
) -> ReenactPlan:
    """Plan the intermediate 2D landmark positions of a reenactment.

    ``n=None`` picks the step count automatically from ``step_budget``
    degrees of planar pose change per step.
    """
    if len(v_s) != len(v_t):
        raise ValidationError(
            f"landmark counts differ: {len(v_s)} vs {len(v_t)}"
        )
    if n is None:
        n = auto_step_count(e_s, e_t, step_budget)
    if n < 1:
        raise ValidationError(f"step count must be >= 1, got {n}")

    c_s, c_t = v_s.centroid(), v_t.centroid()
    a_s, a_t = e_s.as_array(), e_t.as_array()
    # Orientation-free source shape; re-posed rigidly at each step.
    shape = (v_s.points - c_s) @ rotation_matrix(e_s)

    steps, poses, ts = [], [], []
    for j in range(1, n + 1):
        t = j / n
        pose = EulerPose(*((1.0 - t) * a_s + t * a_t))
        centroid = (1.0 - t) * c_s + t * c_t
        pts3 = shape @ rotation_matrix(pose).T + centroid
        steps.append(LandmarkSet(pts3[:, :2]))
        poses.append(pose)
        ts.append(t)

    if final_landmarks is not None:
        if len(final_landmarks) != len(v_s):
            raise ValidationError("final landmark count does not match the plan")
        steps[-1] = final_landmarks

    return ReenactPlan(
        steps=tuple(steps),
        poses=tuple(poses),
        ts=tuple(ts),
        source_pose=e_s,
        target_pose=e_t,
    )


def reenact_sequence(
    source: Image,
    plan: ReenactPlan,
    gen,
    sigma: float | None = None,
) -> tuple[Image, SegMask]:
    """Drive the recurrent generator through the plan: each step feeds the
    previous output back in with the next step's landmark heatmap."""
    current = source
    mask = None
    for j, landmarks in enumerate(plan.steps, start=1):
        heatmap = encode_landmarks(landmarks, current.height, current.width, sigma)
        try:
            result = gen.generate(current, heatmap)
        except Exception as exc:
            raise PipelineError(f"reenactment step {j}/{plan.n}", exc) from exc
        current, mask = result.image, result.mask
    return current, mask


def transfer_expression(
    p_t: LandmarkSet,
    p_s: LandmarkSet,
    mouth_range: range | Sequence[int] = DEFAULT_MOUTH_RANGE,
    anchors: tuple[int, int] = DEFAULT_MOUTH_ANCHORS,
) -> LandmarkSet:
    """Swap the source's mouth points into the target landmark set.

    The source mouth is rigidly aligned into the target mouth frame by the
    exact two-point similarity transform on the mouth-corner anchors; every
    index outside ``mouth_range`` stays bitwise equal to the target.
    """
    if len(p_t) != len(p_s):
        raise ValidationError(f"landmark counts differ: {len(p_t)} vs {len(p_s)}")
    if not isinstance(mouth_range, range):
        mouth_range = range(int(mouth_range[0]), int(mouth_range[1]))
    if len(mouth_range) == 0:
        raise ValidationError("mouth range is empty")
    if mouth_range.start < 0 or mouth_range.stop > len(p_t) or mouth_range.step != 1:
        raise ValidationError(f"mouth range {mouth_range} invalid for {len(p_t)} landmarks")
    a1, a2 = anchors
    if a1 == a2 or a1 not in mouth_range or a2 not in mouth_range:
        raise ValidationError(f"anchors {anchors} must be two distinct mouth indices")

    s = p_s.points[:, 0] + 1j * p_s.points[:, 1]
    t = p_t.points[:, 0] + 1j * p_t.points[:, 1]
    denom = s[a2] - s[a1]
    if denom == 0:
        raise ValidationError("source mouth anchors coincide; similarity is undefined")

    mouth = s[mouth_range.start : mouth_range.stop]
    if s[a1] == t[a1] and s[a2] == t[a2]:
        # Identical anchor pairs define the identity transform.
        moved = mouth.copy()
    else:
        ratio = (t[a2] - t[a1]) / denom
        moved = t[a1] + ratio * (mouth - s[a1])
        # The two-point similarity maps the anchors exactly; pin them to kill
        # float drift so repeated transfers are bitwise idempotent.
        moved[a1 - mouth_range.start] = t[a1]
        moved[a2 - mouth_range.start] = t[a2]

    out = p_t.points.copy()
    out[mouth_range.start : mouth_range.stop, 0] = moved.real
    out[mouth_range.start : mouth_range.stop, 1] = moved.imag
    return LandmarkSet(out)
