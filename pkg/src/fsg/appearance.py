"""Appearance maps: pose-space view indexing and continuous face-view
interpolation.

A subject's available head poses, projected onto the (yaw, pitch) plane, are
pruned for near-duplicates, fenced by four boundary corners at ``±bound``
degrees (default 75), and Delaunay-triangulated.  A query pose locates its
containing triangle and blends the reenacted view images of that triangle's
vertices by barycentric weight; boundary corners never contribute — their
weight is redistributed over the remaining view vertices.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import delaunay
from .core import (
    EulerPose,
    Image,
    LandmarkSet,
    PlanePoint,
    SegMask,
    angular_distance,
    pose_to_plane,
)
from .errors import (
    NoViewError,
    OutOfRangeError,
    PipelineError,
    ValidationError,
)
from .heatmaps import encode_landmarks

DEFAULT_BOUND = 75.0
DEFAULT_PRUNE_RADIUS = 5.0

FSAM_MAGIC = b"FSAM"
FSAM_VERSION = 1


@dataclass(frozen=True)
class ViewRecord:
    """One retained face view embedded in the angular plane."""

    point: PlanePoint
    view_id: str
    flipped: bool = False


@dataclass(frozen=True)
class SourceView:
    """A source subject frame: image plus the metadata the map machinery needs."""

    view_id: str
    image: Image
    pose: EulerPose
    landmarks: LandmarkSet | None = None
    blur: float | None = None
    flipped: bool = False


@dataclass(frozen=True)
class AppearanceMap:
    views: tuple[ViewRecord, ...]
    boundary: tuple[PlanePoint, PlanePoint, PlanePoint, PlanePoint]
    triangles: tuple[tuple[int, int, int], ...]
    bound: float = DEFAULT_BOUND

    @property
    def n_views(self) -> int:
        return len(self.views)

    def vertex_array(self) -> np.ndarray:
        pts = [v.point.as_array() for v in self.views]
        pts += [b.as_array() for b in self.boundary]
        return np.array(pts, dtype=np.float64)

    def is_view_vertex(self, index: int) -> bool:
        return index < len(self.views)


@dataclass(frozen=True)
class ViewQuery:
    """Containing triangle plus barycentric weights of a pose query.

    ``weights`` aligns with ``triangle``; boundary-corner vertices carry
    weight 0 and the remaining entries are renormalized to sum to one.
    ``raw_weights`` are the pre-exclusion barycentric coordinates.
    """

    triangle: tuple[int, int, int]
    weights: tuple[float, float, float]
    raw_weights: tuple[float, float, float]

    def view_weights(self, amap: AppearanceMap) -> list[tuple[str, float]]:
        out = []
        for idx, w in zip(self.triangle, self.weights):
            if amap.is_view_vertex(idx) and w > 0.0:
                out.append((amap.views[idx].view_id, w))
        return out


@dataclass(frozen=True)
class ViewInterpolation:
    image: Image
    mask: SegMask
    query: ViewQuery


def prune_views(
    points: Sequence[tuple[PlanePoint, float, float | None]],
    radius: float,
    blur_threshold: float | None = None,
) -> list[int]:
    """Greedy radius pruning in the angular plane.

    Entries are ``(plane point, roll, blur score or None)``.  Blur-scored
    entries above ``blur_threshold`` are dropped first; the rest are visited
    in ascending ``|roll|`` order (ties by index) and a candidate is dropped
    when a previously retained point lies strictly within ``radius``.
    Returns retained indices in ascending order.
    """
    if not radius > 0:
        raise ValidationError(f"prune radius must be positive, got {radius}")
    if not points:
        return []

    candidates = []
    for idx, (point, roll, blur) in enumerate(points):
        if blur_threshold is not None and blur is not None and blur > blur_threshold:
            continue
        candidates.append((abs(float(roll)), idx, point))
    if not candidates:
        return []
    candidates.sort(key=lambda item: (item[0], item[1]))

    coords = np.array(
        [[p.yaw, p.pitch] for _, _, p in candidates], dtype=np.float64
    )
    tree = cKDTree(coords)
    retained_local: list[int] = []
    retained_flags = np.zeros(len(candidates), dtype=bool)
    for local, (_, _, point) in enumerate(candidates):
        xy = coords[local]
        blocked = False
        for nb in tree.query_ball_point(xy, radius):
            if not retained_flags[nb]:
                continue
            if float(np.hypot(*(coords[nb] - xy))) < radius:
                blocked = True
                break
        if not blocked:
            retained_flags[local] = True
            retained_local.append(local)

    return sorted(candidates[local][1] for local in retained_local)


def build_map(
    views: Sequence[ViewRecord | tuple[PlanePoint, str]],
    bound: float = DEFAULT_BOUND,
) -> AppearanceMap:
    """Triangulate retained views together with the four boundary corners."""
    if not views:
        raise ValidationError("cannot build an appearance map from zero views")
    records = []
    for v in views:
        if isinstance(v, ViewRecord):
            records.append(v)
        else:
            point, view_id = v
            records.append(ViewRecord(point=point, view_id=str(view_id)))

    seen: set[tuple[float, float]] = set()
    for rec in records:
        key = (rec.point.yaw, rec.point.pitch)
        if key in seen:
            raise ValidationError(f"duplicate view point {key} after pruning")
        seen.add(key)
        if abs(rec.point.yaw) >= bound or abs(rec.point.pitch) >= bound:
            raise ValidationError(
                f"view point {key} must lie strictly inside the ±{bound}° box"
            )

    corners = (
        PlanePoint(-bound, -bound),
        PlanePoint(bound, -bound),
        PlanePoint(bound, bound),
        PlanePoint(-bound, bound),
    )
    pts = np.array(
        [[r.point.yaw, r.point.pitch] for r in records]
        + [[c.yaw, c.pitch] for c in corners],
        dtype=np.float64,
    )
    triangles = delaunay.triangulate_in_box(pts, box_start=len(records))
    for tri in triangles:
        if delaunay.triangle_area2(pts, tri) <= 2e-12:
            raise ValidationError(f"degenerate triangle {tri} in appearance map")
    return AppearanceMap(
        views=tuple(records),
        boundary=corners,
        triangles=tuple(triangles),
        bound=float(bound),
    )


def query(amap: AppearanceMap, pose: EulerPose) -> ViewQuery:
    """Locate the pose in the mesh and return renormalized view weights."""
    plane = pose_to_plane(pose)
    if abs(plane.yaw) > amap.bound or abs(plane.pitch) > amap.bound:
        raise OutOfRangeError(
            f"query ({plane.yaw}, {plane.pitch}) outside the ±{amap.bound}° box"
        )
    pts = amap.vertex_array()
    target = plane.as_array()
    tri = None
    for candidate in amap.triangles:
        if delaunay.contains_point(pts, candidate, target):
            tri = candidate
            break
    if tri is None:  # cannot happen for a valid map; guards corrupt inputs
        raise ValidationError("appearance map does not cover the query point")

    raw = delaunay.barycentric(pts, tri, target)
    raw = np.where(raw < 0.0, 0.0, raw)
    raw = raw / raw.sum()

    is_view = np.array([amap.is_view_vertex(i) for i in tri])
    if not is_view.any():
        raise NoViewError("all three triangle vertices are boundary corners")
    mass = float(raw[is_view].sum())
    if mass <= 0.0:
        raise NoViewError("query carries no weight on any view vertex")
    weights = np.where(is_view, raw / mass, 0.0)
    return ViewQuery(
        triangle=tuple(int(i) for i in tri),
        weights=tuple(float(w) for w in weights),
        raw_weights=tuple(float(w) for w in raw),
    )


def interpolate_views(
    amap: AppearanceMap,
    pose: EulerPose,
    target_landmarks: LandmarkSet,
    images: Mapping[str, Image],
    gen,
    sigma: float | None = None,
) -> ViewInterpolation:
    """Blend per-view reenactments at the query's barycentric weights.

    Each selected view image is reenacted toward the target landmarks through
    ``gen`` and the outputs are reduced pixelwise in ascending vertex order.
    Masks combine by weighted per-class vote.
    """
    vq = query(amap, pose)
    selected = [
        (idx, w)
        for idx, w in sorted(zip(vq.triangle, vq.weights))
        if amap.is_view_vertex(idx) and w > 0.0
    ]

    first_missing = next(
        (amap.views[idx].view_id for idx, _ in selected
         if amap.views[idx].view_id not in images),
        None,
    )
    if first_missing is not None:
        raise ValidationError(f"missing image for view {first_missing!r}")

    shapes = {images[amap.views[idx].view_id].data.shape for idx, _ in selected}
    if len(shapes) != 1:
        raise ValidationError(f"selected view images disagree on shape: {shapes}")
    height, width, _ = shapes.pop()
    heatmap = encode_landmarks(target_landmarks, height, width, sigma)

    acc = None
    votes = np.zeros((height, width, 3), dtype=np.float64)
    for idx, w in selected:
        view = amap.views[idx]
        try:
            result = gen.generate(images[view.view_id], heatmap)
        except Exception as exc:
            raise PipelineError("interpolate", exc) from exc
        term = w * result.image.data.astype(np.float64)
        acc = term if acc is None else acc + term
        for c in range(3):
            votes[:, :, c] += w * (result.mask.labels == c)

    out = acc.astype(np.float32)
    np.clip(out, 0.0, 1.0, out=out)
    mask = SegMask(np.argmax(votes, axis=2).astype(np.uint8))
    return ViewInterpolation(image=Image(out), mask=mask, query=vq)


def flip_augment(
    views: Sequence[SourceView],
    symmetry: Sequence[int] | None = None,
    yaw_epsilon: float = 1e-9,
) -> list[SourceView]:
    """Mirror views across yaw 0 when the map would otherwise be one-sided.

    A mirrored entry negates yaw and roll, horizontally flips the image and
    mirrors landmarks, reordering them by ``symmetry`` (``new[i] =
    old[symmetry[i]]``).  Two-sided inputs pass through unchanged.
    """
    views = list(views)
    yaws = [v.pose.yaw for v in views]
    positive = all(y >= -yaw_epsilon for y in yaws) and any(y > yaw_epsilon for y in yaws)
    negative = all(y <= yaw_epsilon for y in yaws) and any(y < -yaw_epsilon for y in yaws)
    if not (positive or negative):
        return views

    flippable = [v for v in views if abs(v.pose.yaw) > yaw_epsilon]
    if symmetry is None and any(v.landmarks is not None for v in flippable):
        raise ValidationError(
            "flip augmentation needs a landmark symmetry permutation"
        )

    augmented = list(views)
    for v in flippable:
        augmented.append(mirror_view(v, symmetry))
    return augmented


def mirror_view(view: SourceView, symmetry: Sequence[int] | None) -> SourceView:
    flipped_img = Image(np.ascontiguousarray(view.image.data[:, ::-1, :]))
    landmarks = None
    if view.landmarks is not None:
        if symmetry is None:
            raise ValidationError(
                "flip augmentation needs a landmark symmetry permutation"
            )
        perm = np.asarray(symmetry, dtype=np.intp)
        if sorted(perm.tolist()) != list(range(len(view.landmarks))):
            raise ValidationError("symmetry must be a permutation of landmark indices")
        pts = view.landmarks.points.copy()
        pts[:, 0] = (view.image.width - 1) - pts[:, 0]
        landmarks = LandmarkSet(pts[perm])
    pose = EulerPose(-view.pose.yaw, view.pose.pitch, -view.pose.roll)
    return replace(
        view,
        view_id=f"{view.view_id}~flip",
        image=flipped_img,
        pose=pose,
        landmarks=landmarks,
        flipped=True,
    )


def map_to_json(amap: AppearanceMap) -> dict:
    return {
        "format": "FSAM",
        "version": FSAM_VERSION,
        "bound": amap.bound,
        "views": [
            {
                "id": v.view_id,
                "yaw": v.point.yaw,
                "pitch": v.point.pitch,
                "flipped": v.flipped,
            }
            for v in amap.views
        ],
        "boundary": [[b.yaw, b.pitch] for b in amap.boundary],
        "triangles": [list(t) for t in amap.triangles],
    }


def map_from_json(doc: dict) -> AppearanceMap:
    try:
        if doc["format"] != "FSAM" or doc["version"] != FSAM_VERSION:
            raise ValidationError("unsupported appearance-map document")
        views = tuple(
            ViewRecord(
                point=PlanePoint(v["yaw"], v["pitch"]),
                view_id=str(v["id"]),
                flipped=bool(v.get("flipped", False)),
            )
            for v in doc["views"]
        )
        boundary = tuple(PlanePoint(y, p) for y, p in doc["boundary"])
        triangles = tuple(tuple(int(i) for i in t) for t in doc["triangles"])
        return AppearanceMap(
            views=views,
            boundary=boundary,
            triangles=triangles,
            bound=float(doc["bound"]),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed appearance-map document: {exc}") from exc


def map_to_bytes(amap: AppearanceMap) -> bytes:
    out = bytearray()
    out += struct.pack(
        "<4sIdIII",
        FSAM_MAGIC,
        FSAM_VERSION,
        amap.bound,
        len(amap.views),
        len(amap.boundary),
        len(amap.triangles),
    )
    for v in amap.views:
        vid = v.view_id.encode("utf-8")
        out += struct.pack("<ddBH", v.point.yaw, v.point.pitch, int(v.flipped), len(vid))
        out += vid
    for b in amap.boundary:
        out += struct.pack("<dd", b.yaw, b.pitch)
    for t in amap.triangles:
        out += struct.pack("<III", *t)
    return bytes(out)


def map_from_bytes(raw: bytes) -> AppearanceMap:
    head = struct.Struct("<4sIdIII")
    if len(raw) < head.size:
        raise ValidationError("truncated appearance-map file")
    magic, version, bound, n_views, n_boundary, n_triangles = head.unpack_from(raw)
    if magic != FSAM_MAGIC:
        raise ValidationError("not an appearance-map (FSAM) file")
    if version != FSAM_VERSION:
        raise ValidationError(f"unsupported FSAM version {version}")
    if n_boundary != 4:
        raise ValidationError("appearance map must carry exactly 4 boundary points")
    off = head.size
    try:
        views = []
        for _ in range(n_views):
            yaw, pitch, flipped, idlen = struct.unpack_from("<ddBH", raw, off)
            off += struct.calcsize("<ddBH")
            vid = raw[off : off + idlen].decode("utf-8")
            if len(raw) < off + idlen:
                raise ValidationError("truncated appearance-map file")
            off += idlen
            views.append(ViewRecord(PlanePoint(yaw, pitch), vid, bool(flipped)))
        boundary = []
        for _ in range(n_boundary):
            yaw, pitch = struct.unpack_from("<dd", raw, off)
            off += 16
            boundary.append(PlanePoint(yaw, pitch))
        triangles = []
        for _ in range(n_triangles):
            triangles.append(struct.unpack_from("<III", raw, off))
            off += 12
    except struct.error as exc:
        raise ValidationError(f"truncated appearance-map file: {exc}") from exc
    if off != len(raw):
        raise ValidationError("trailing bytes in appearance-map file")
    return AppearanceMap(
        views=tuple(views),
        boundary=tuple(boundary),
        triangles=tuple(tuple(int(i) for i in t) for t in triangles),
        bound=float(bound),
    )


def save_map(path, amap: AppearanceMap) -> None:
    from pathlib import Path

    Path(path).write_bytes(map_to_bytes(amap))


def load_map(path) -> AppearanceMap:
    from pathlib import Path

    return map_from_bytes(Path(path).read_bytes())


def angular_gap(a: EulerPose, b: EulerPose) -> float:
    """Planar (yaw, pitch) distance between two poses."""
    return angular_distance(pose_to_plane(a), pose_to_plane(b))


def save_map_json(path, amap: AppearanceMap) -> None:
    from pathlib import Path

    Path(path).write_text(json.dumps(map_to_json(amap), indent=2) + "\n")
