"""Synthetic parametric faces.

A deterministic 70-point landmark template laid out like the common 68-point
scheme (jaw 0-16, brows 17-26, nose 27-35, eyes 36-47, mouth 48-67) plus two
pupil points (68-69).  The template is left-right symmetric, renders to a
simple flat-shaded face image, and round-trips exactly through the pose
machinery — which makes it a ground-truth oracle for reenactment and swap
tests: the landmarks of a rendered face are known by construction.
"""

from __future__ import annotations

import numpy as np

from .core import (
    BACKGROUND,
    DEFAULT_LANDMARK_COUNT,
    EulerPose,
    FACE,
    Image,
    Landmark3DSet,
    LandmarkSet,
    SegMask,
    rotation_matrix,
)

LANDMARK_COUNT = DEFAULT_LANDMARK_COUNT
MOUTH_RANGE = range(48, 68)
MOUTH_ANCHORS = (48, 54)

BACKGROUND_COLOR = (0.10, 0.12, 0.14)
SKIN_COLOR = (0.80, 0.62, 0.50)
FEATURE_COLOR = (0.30, 0.15, 0.12)


def template_landmarks_3d(size: float = 1.0) -> Landmark3DSet:
    """The canonical (unposed) 3D landmark template, centered at the origin."""
    pts = np.zeros((LANDMARK_COUNT, 3), dtype=np.float64)

    # Jaw: lower half-ellipse, chin at index 8.
    t = np.linspace(-np.pi / 2, np.pi / 2, 17)
    pts[0:17, 0] = 0.50 * np.sin(t)
    pts[0:17, 1] = 0.60 * np.cos(t)
    pts[0:17, 2] = 0.10 * np.abs(np.sin(t))

    # Brows: two gentle arcs.
    bx = np.linspace(-0.38, -0.08, 5)
    pts[17:22, 0] = bx
    pts[17:22, 1] = -0.32 - 0.05 * np.cos(np.linspace(-1, 1, 5))
    pts[22:27, 0] = -bx[::-1]
    pts[22:27, 1] = pts[17:22, 1][::-1]
    pts[17:27, 2] = -0.08

    # Nose: bridge (27-30) and base (31-35), tip toward the camera.
    pts[27:31, 1] = np.linspace(-0.25, 0.05, 4)
    pts[27:31, 2] = np.linspace(-0.10, -0.28, 4)
    pts[31:36, 0] = np.linspace(-0.10, 0.10, 5)
    pts[31:36, 1] = 0.12
    pts[31:36, 2] = -0.16

    # Eyes: two hexagonal rings.
    ang = np.linspace(0.0, 2.0 * np.pi, 6, endpoint=False)
    eye = np.stack([0.07 * np.cos(ang), 0.035 * np.sin(ang)], axis=1)
    pts[36:42, 0] = -0.22 + eye[:, 0]
    pts[36:42, 1] = -0.15 + eye[:, 1]
    pts[42:48, 0] = 0.22 + eye[:, 0]
    pts[42:48, 1] = -0.15 + eye[:, 1]
    pts[36:48, 2] = -0.10

    # Mouth: outer ring of 12 (48-59, corners 48 and 54), inner ring of 8.
    ang = np.linspace(np.pi, 3.0 * np.pi, 12, endpoint=False)
    pts[48:60, 0] = 0.16 * np.cos(ang)
    pts[48:60, 1] = 0.32 + 0.08 * np.sin(ang)
    ang = np.linspace(np.pi, 3.0 * np.pi, 8, endpoint=False)
    pts[60:68, 0] = 0.10 * np.cos(ang)
    pts[60:68, 1] = 0.32 + 0.04 * np.sin(ang)
    pts[48:68, 2] = -0.12

    # Pupils.
    pts[68] = (-0.22, -0.15, -0.11)
    pts[69] = (0.22, -0.15, -0.11)

    return Landmark3DSet(pts * size)


def symmetry_permutation() -> np.ndarray:
    """Index permutation mapping each template point to its mirror partner."""
    perm = np.arange(LANDMARK_COUNT)
    perm[0:17] = perm[0:17][::-1]
    perm[17:27] = perm[17:27][::-1]
    # Nose bridge is self-symmetric; base flips.
    perm[31:36] = perm[31:36][::-1]
    # Eye rings swap sides; ring vertices at ±angle exchange.
    left = np.arange(36, 42)
    right = np.arange(42, 48)
    ring_mirror = np.array([3, 2, 1, 0, 5, 4])
    perm[36:42] = right[ring_mirror]
    perm[42:48] = left[ring_mirror]
    outer = np.arange(48, 60)
    perm[48:60] = outer[(np.array([6, 5, 4, 3, 2, 1, 0, 11, 10, 9, 8, 7]))]
    inner = np.arange(60, 68)
    perm[60:68] = inner[(np.array([4, 3, 2, 1, 0, 7, 6, 5]))]
    perm[68], perm[69] = 69, 68
    return perm


def pose_landmarks(
    pose: EulerPose,
    center: tuple[float, float, float],
    scale: float,
) -> tuple[Landmark3DSet, LandmarkSet]:
    """Rigidly pose the template and project it orthographically.

    ``center`` is the landmark centroid in pixel units (x, y, z); ``scale``
    converts template units to pixels.
    """
    template = template_landmarks_3d(scale).points
    rot = rotation_matrix(pose)
    pts3 = template @ rot.T + np.asarray(center, dtype=np.float64)
    return Landmark3DSet(pts3), LandmarkSet(pts3[:, :2])


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Monotone-chain convex hull, ccw, of (N, 2) points."""
    pts = sorted(map(tuple, points))
    if len(pts) <= 2:
        return np.asarray(pts, dtype=np.float64)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.asarray(lower[:-1] + upper[:-1], dtype=np.float64)


def hull_fill(points: np.ndarray, height: int, width: int, margin: float = 0.0) -> np.ndarray:
    """Boolean raster of pixels whose center lies inside the convex hull
    of ``points`` (optionally dilated outward by ``margin`` pixels)."""
    hull = convex_hull(points)
    if hull.shape[0] < 3:
        return np.zeros((height, width), dtype=bool)
    if margin != 0.0:
        centroid = hull.mean(axis=0)
        offsets = hull - centroid
        norms = np.linalg.norm(offsets, axis=1, keepdims=True)
        hull = hull + margin * offsets / np.maximum(norms, 1e-12)
    cols, rows = np.meshgrid(np.arange(width), np.arange(height))
    inside = np.ones((height, width), dtype=bool)
    n = hull.shape[0]
    for i in range(n):
        ax, ay = hull[i]
        bx, by = hull[(i + 1) % n]
        inside &= (bx - ax) * (rows - ay) - (by - ay) * (cols - ax) >= 0.0
    return inside


def face_mask(landmarks: LandmarkSet, height: int, width: int) -> SegMask:
    labels = np.full((height, width), BACKGROUND, dtype=np.uint8)
    labels[hull_fill(landmarks.points, height, width, margin=2.0)] = FACE
    return SegMask(labels)


def render_face(landmarks: LandmarkSet, height: int, width: int) -> Image:
    """Flat-shaded synthetic face: skin over the landmark hull, soft feature
    blobs at eyes/nose/mouth, constant background."""
    img = np.empty((height, width, 3), dtype=np.float64)
    for c, v in enumerate(BACKGROUND_COLOR):
        img[:, :, c] = v
    skin = hull_fill(landmarks.points, height, width, margin=2.0)
    for c, v in enumerate(SKIN_COLOR):
        img[:, :, c][skin] = v

    cols, rows = np.meshgrid(np.arange(width, dtype=np.float64),
                             np.arange(height, dtype=np.float64))
    feature_pts = landmarks.points[list(range(36, 70))]
    blob = np.zeros((height, width), dtype=np.float64)
    span = max(float(np.ptp(landmarks.points[:, 1])), 1.0)
    radius = 0.04 * span
    for px, py in feature_pts:
        blob += np.exp(-((cols - px) ** 2 + (rows - py) ** 2) / (2.0 * radius**2))
    blob = np.clip(blob, 0.0, 1.0) * skin
    for c, v in enumerate(FEATURE_COLOR):
        img[:, :, c] = img[:, :, c] * (1.0 - blob) + v * blob
    return Image(np.clip(img, 0.0, 1.0).astype(np.float32))
