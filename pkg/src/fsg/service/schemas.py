"""Pydantic request/response models for the HTTP service.

Rasters travel as base64 payloads: images as little-endian float32 in the
canonical (row, col, channel) order, masks as raw uint8 labels.  Everything
else is plain JSON.
"""

from __future__ import annotations

import base64

import numpy as np
from pydantic import BaseModel, Field

from ..core import EulerPose, Image, LandmarkSet, SegMask
from ..errors import ValidationError


class ImagePayload(BaseModel):
    height: int
    width: int
    channels: int
    data_b64: str

    @classmethod
    def from_image(cls, img: Image) -> "ImagePayload":
        raw = np.ascontiguousarray(img.data, dtype="<f4").tobytes()
        return cls(
            height=img.height,
            width=img.width,
            channels=img.channels,
            data_b64=base64.b64encode(raw).decode("ascii"),
        )

    def to_image(self) -> Image:
        raw = base64.b64decode(self.data_b64)
        count = self.height * self.width * self.channels
        if len(raw) != 4 * count:
            raise ValidationError(
                f"image payload carries {len(raw)} bytes, expected {4 * count}"
            )
        arr = np.frombuffer(raw, dtype="<f4", count=count)
        return Image(arr.reshape(self.height, self.width, self.channels).copy())


class MaskPayload(BaseModel):
    height: int
    width: int
    labels_b64: str

    @classmethod
    def from_mask(cls, mask: SegMask) -> "MaskPayload":
        raw = np.ascontiguousarray(mask.labels).tobytes()
        return cls(
            height=mask.height,
            width=mask.width,
            labels_b64=base64.b64encode(raw).decode("ascii"),
        )

    def to_mask(self) -> SegMask:
        raw = base64.b64decode(self.labels_b64)
        count = self.height * self.width
        if len(raw) != count:
            raise ValidationError(
                f"mask payload carries {len(raw)} bytes, expected {count}"
            )
        arr = np.frombuffer(raw, dtype=np.uint8, count=count)
        return SegMask(arr.reshape(self.height, self.width).copy())

    def to_binary(self) -> np.ndarray:
        return self.to_mask().labels > 0


class PosePayload(BaseModel):
    yaw: float
    pitch: float
    roll: float = 0.0

    def to_pose(self) -> EulerPose:
        return EulerPose(self.yaw, self.pitch, self.roll)


class LandmarksPayload(BaseModel):
    points: list[list[float]]

    @classmethod
    def from_landmarks(cls, lm: LandmarkSet) -> "LandmarksPayload":
        return cls(points=lm.points.tolist())

    def to_landmarks(self) -> LandmarkSet:
        return LandmarkSet(np.asarray(self.points, dtype=np.float64))


class SolverReportPayload(BaseModel):
    iterations: int
    residual: float
    method: str
    converged: bool
    tol: float


class BlendRequest(BaseModel):
    target: ImagePayload
    source: ImagePayload
    mask: MaskPayload
    tol: float = 1e-6
    max_iter: int | None = None
    method: str = "auto"


class BlendResponse(BaseModel):
    image: ImagePayload
    report: SolverReportPayload


class ViewGeometry(BaseModel):
    id: str
    yaw: float
    pitch: float
    roll: float = 0.0
    blur: float | None = None


class BuildMapRequest(BaseModel):
    views: list[ViewGeometry]
    prune_radius: float = 5.0
    blur_threshold: float | None = None
    bound: float = 75.0
    flip_fill: bool = True


class BuildMapResponse(BaseModel):
    map: dict
    fsam_b64: str
    retained_ids: list[str]


class QueryRequest(BaseModel):
    map: dict | None = None
    map_fsam_b64: str | None = None
    pose: PosePayload


class QueryResponse(BaseModel):
    triangle: list[int]
    weights: list[float]
    raw_weights: list[float]
    views: list[tuple[str, float]]


class GeneratorEndpoints(BaseModel):
    r: str = "mock:identity"
    s: str = "mock:segment-bg"
    c: str = "mock:identity"
    b: str | None = None


class OcclusionPayload(BaseModel):
    count: tuple[int, int] = (1, 3)
    semi_axis: tuple[float, float] = (0.05, 0.25)
    aspect: tuple[float, float] = (0.3, 1.0)
    seed: int = 0


class SwapConfigPayload(BaseModel):
    step_budget: float = 15.0
    prune_radius: float = 5.0
    blur_threshold: float | None = None
    occlusion: OcclusionPayload | None = None
    tol: float = 1e-6
    max_iter: int | None = None
    hair_as_free: bool = False
    sigma: float | None = None
    bound: float = 75.0
    flip_fill: bool = True
    flip_symmetry: list[int] | None = None
    timeout: float = 30.0
    generators: GeneratorEndpoints = Field(default_factory=GeneratorEndpoints)


class SourceViewPayload(BaseModel):
    id: str
    image: ImagePayload
    pose: PosePayload
    landmarks: LandmarksPayload | None = None
    blur: float | None = None


class TargetFramePayload(BaseModel):
    image: ImagePayload
    landmarks: LandmarksPayload
    pose: PosePayload


class SwapRequest(BaseModel):
    sources: list[SourceViewPayload]
    targets: list[TargetFramePayload]
    config: SwapConfigPayload = Field(default_factory=SwapConfigPayload)


class SwapResponse(BaseModel):
    frames: list[ImagePayload]
    reports: list[SolverReportPayload | None]


class FrameRecordPayload(BaseModel):
    id: str
    yaw: float
    pitch: float
    roll: float = 0.0
    blur: float | None = None
    coverage: float = 1.0
    landmarks: LandmarksPayload | None = None


class CurateRequest(BaseModel):
    frames: list[FrameRecordPayload]
    coverage_min: float = 0.15
    prune_radius: float = 5.0
    blur_threshold: float | None = None
    cap: int = 100


class CurateResponse(BaseModel):
    retained_ids: list[str]


class EvalFramePayload(BaseModel):
    result: ImagePayload
    reference: ImagePayload
    result_pose: PosePayload
    target_pose: PosePayload
    result_landmarks: LandmarksPayload
    target_landmarks: LandmarksPayload
    verification: float | None = None


class EvalVideoPayload(BaseModel):
    video_id: str
    frames: list[EvalFramePayload]


class EvalRequest(BaseModel):
    videos: list[EvalVideoPayload]


class EvalResponse(BaseModel):
    stats: dict[str, tuple[float, float]]
    table: dict[str, str]
    csv: str


class DensifyRequest(BaseModel):
    sources: list[SourceViewPayload]
    poses: list[PosePayload]
    config: SwapConfigPayload = Field(default_factory=SwapConfigPayload)


class DensifyResponse(BaseModel):
    views: list[SourceViewPayload]


class ErrorBody(BaseModel):
    error_class: str
    message: str
