"""Full swap orchestration: reenact/interpolate, segment, inpaint, blend.

A :class:`SwapSession` builds the source subject's appearance map once
(optional horizontal-flip fill-in, angular pruning, triangulation) and then
swaps any number of target frames against it.  Stages per frame:

1. view interpolation at the target pose, reenacting the selected views to
   the target landmarks through the ``r`` generator;
2. target segmentation through the ``s`` generator;
3. background removal and inpainting through the ``c`` generator — the
   inpainting target shape is the target's face region, the known pixels are
   the intersection of the reenacted and target face regions;
4. transfer onto the target frame and blending: through the optional ``b``
   generator, otherwise the built-in gradient-domain solve.

Every pixel outside the target's transfer region reproduces the target frame
bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import poisson
from .appearance import (
    DEFAULT_BOUND,
    DEFAULT_PRUNE_RADIUS,
    SourceView,
    ViewRecord,
    build_map,
    flip_augment,
    interpolate_views,
    prune_views,
)
from .core import FACE, EulerPose, Image, LandmarkSet, SegMask, pose_to_plane
from .errors import PipelineError, ValidationError
from .generators import GeneratorHandle
from .masks import OcclusionSpec, occlude_border
from .reenact import DEFAULT_STEP_BUDGET

REQUIRED_ROLES = ("r", "s", "c")


@dataclass(frozen=True)
class SwapConfig:
    """Pipeline knobs; generator endpoints are strings per role (r/s/c/b —
    b optional, the Poisson solve is the fallback blender)."""

    step_budget: float = DEFAULT_STEP_BUDGET
    prune_radius: float = DEFAULT_PRUNE_RADIUS
    blur_threshold: float | None = None
    occlusion: OcclusionSpec | None = None
    tol: float = poisson.DEFAULT_TOL
    max_iter: int | None = None
    hair_as_free: bool = False
    sigma: float | None = None
    bound: float = DEFAULT_BOUND
    flip_fill: bool = True
    flip_symmetry: tuple[int, ...] | None = None
    generators: dict[str, str] = field(default_factory=dict)
    timeout: float = 30.0

    def __post_init__(self):
        for name in ("step_budget", "prune_radius", "tol", "bound", "timeout"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"config {name} must be positive")


@dataclass(frozen=True)
class TargetFrame:
    image: Image
    landmarks: LandmarkSet
    pose: EulerPose


@dataclass(frozen=True)
class SwapResult:
    image: Image
    reenacted: Image
    reenacted_mask: SegMask
    target_mask: SegMask
    inpainted: Image
    transfer: Image
    report: poisson.SolverReport | None


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(name, exc) from exc


class SwapSession:
    """Reusable swap context: appearance map + generator handles."""

    def __init__(
        self,
        sources: Sequence[SourceView],
        config: SwapConfig,
        generators: Mapping[str, GeneratorHandle],
    ):
        for role in REQUIRED_ROLES:
            if role not in generators:
                raise ValidationError(f"missing generator handle for role {role!r}")
        self.config = config
        self.generators = dict(generators)

        views = list(sources)
        if config.flip_fill:
            views = _stage(
                "flip-fill", flip_augment, views, config.flip_symmetry
            )
        entries = [(pose_to_plane(v.pose), v.pose.roll, v.blur) for v in views]
        retained = _stage(
            "prune",
            prune_views,
            entries,
            config.prune_radius,
            config.blur_threshold,
        )
        if not retained:
            raise ValidationError("no source views survive pruning")
        kept = [views[i] for i in retained]
        self.views = kept
        self.images = {v.view_id: v.image for v in kept}
        self.map = _stage(
            "build-map",
            build_map,
            [ViewRecord(pose_to_plane(v.pose), v.view_id, v.flipped) for v in kept],
            config.bound,
        )

    def swap_frame(self, target: TargetFrame) -> SwapResult:
        cfg = self.config

        interp = _stage(
            "view-interpolation",
            interpolate_views,
            self.map,
            target.pose,
            target.landmarks,
            self.images,
            self.generators["r"],
            cfg.sigma,
        )
        reenacted, reenacted_mask = interp.image, interp.mask

        seg = _stage("segmentation", self.generators["s"].generate, target.image)
        target_mask = seg.mask

        if cfg.occlusion is not None:
            reenacted_mask = _stage(
                "occlusion-augment", occlude_border, reenacted_mask, cfg.occlusion
            )

        known = (reenacted_mask.labels == FACE) & (target_mask.labels == FACE)
        masked = np.where(known[:, :, None], reenacted.data, np.float32(0.0))
        inpaint_in = Image(masked)
        inp = _stage("inpainting", self.generators["c"].generate, inpaint_in)
        inpainted = inp.image

        free = poisson.transfer_mask(target_mask, cfg.hair_as_free)
        transfer = np.where(free[:, :, None], inpainted.data, target.image.data)
        transfer_img = Image(transfer)

        report = None
        if "b" in self.generators:
            blended = _stage(
                "blending", self.generators["b"].generate, transfer_img
            ).image
            final = np.where(free[:, :, None], blended.data, target.image.data)
            out = Image(final)
        else:
            out, report = _stage(
                "blending",
                poisson.blend,
                poisson.BlendProblem(target.image, transfer_img, free),
                cfg.tol,
                cfg.max_iter,
            )

        return SwapResult(
            image=out,
            reenacted=reenacted,
            reenacted_mask=reenacted_mask,
            target_mask=target_mask,
            inpainted=inpainted,
            transfer=transfer_img,
            report=report,
        )

    def close(self):
        for handle in self.generators.values():
            handle.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def swap(
    sources: Sequence[SourceView],
    target: TargetFrame,
    config: SwapConfig,
    generators: Mapping[str, GeneratorHandle],
) -> Image:
    """One-shot swap of a single target frame; see :class:`SwapSession`."""
    session = SwapSession(sources, config, generators)
    return session.swap_frame(target).image
