"""Quantitative swap/reenactment evaluation.

Per-frame measurements (SSIM against a pose-matched reference, Euler-angle
distance, 2D landmark distance) aggregate into per-video means, then a mean
and population std across videos, rendered as ``mean ± std`` rows to two
decimals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import EulerPose, Image, LandmarkSet
from .errors import ValidationError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_RANGE = 1.0

# ITU-R 601 luma weights for grayscale conversion.
_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float64)

METRIC_COLUMNS = ("verification", "ssim", "euler", "landmarks")


@dataclass(frozen=True)
class SwapEval:
    """One frame's measurements; verification is an optional external score."""

    ssim: float
    euler_err: float
    landmark_err: float
    verification: float | None = None

    def __post_init__(self):
        if not -1.0 <= self.ssim <= 1.0:
            raise ValidationError(f"ssim {self.ssim} outside [-1, 1]")
        if self.euler_err < 0 or self.landmark_err < 0:
            raise ValidationError("error metrics must be non-negative")


def to_gray(img: Image) -> np.ndarray:
    arr = img.data.astype(np.float64)
    if arr.shape[2] == 1:
        return arr[:, :, 0]
    return arr @ _LUMA


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size, dtype=np.float64) - half
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def _filter_valid(arr: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable 'valid' correlation with a symmetric 1-D kernel."""
    size = kernel.size
    rows = arr.shape[0] - size + 1
    tmp = np.zeros((rows, arr.shape[1]), dtype=np.float64)
    for t in range(size):
        tmp += kernel[t] * arr[t : t + rows, :]
    cols = arr.shape[1] - size + 1
    out = np.zeros((rows, cols), dtype=np.float64)
    for t in range(size):
        out += kernel[t] * tmp[:, t : t + cols]
    return out


def ssim(x: Image, y: Image) -> float:
    """Structural similarity with the standard 11x11 sigma-1.5 Gaussian
    window, K1=0.01, K2=0.03, dynamic range 1.0, averaged over valid
    windows.  Color inputs are converted to grayscale first."""
    if x.data.shape != y.data.shape:
        raise ValidationError("ssim inputs must share dimensions")
    if x.height < SSIM_WINDOW or x.width < SSIM_WINDOW:
        raise ValidationError(
            f"ssim needs at least a {SSIM_WINDOW}x{SSIM_WINDOW} image"
        )
    a, b = to_gray(x), to_gray(y)
    kernel = _gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA)
    c1 = (SSIM_K1 * SSIM_RANGE) ** 2
    c2 = (SSIM_K2 * SSIM_RANGE) ** 2

    mu_a = _filter_valid(a, kernel)
    mu_b = _filter_valid(b, kernel)
    ea2 = _filter_valid(a * a, kernel)
    eb2 = _filter_valid(b * b, kernel)
    eab = _filter_valid(a * b, kernel)
    var_a = ea2 - mu_a * mu_a
    var_b = eb2 - mu_b * mu_b
    cov = eab - mu_a * mu_b

    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float((num / den).mean())


def pose_error(a: EulerPose, b: EulerPose) -> float:
    """Euclidean distance between Euler-angle triples, in degrees."""
    return float(np.linalg.norm(a.as_array() - b.as_array()))


def landmark_error(a: LandmarkSet, b: LandmarkSet, per_point: bool = False) -> float:
    """Euclidean norm of the flattened landmark difference, in pixels.

    ``per_point`` switches to the mean per-point distance instead.
    """
    if len(a) != len(b):
        raise ValidationError(f"landmark counts differ: {len(a)} vs {len(b)}")
    diff = a.points - b.points
    if per_point:
        return float(np.sqrt((diff * diff).sum(axis=1)).mean())
    return float(np.linalg.norm(diff.ravel()))


def nearest_pose_index(pose: EulerPose, candidates: Sequence[EulerPose]) -> int:
    """Index of the candidate nearest in full 3-angle Euclidean distance."""
    if not candidates:
        raise ValidationError("nearest-pose lookup needs at least one candidate")
    errs = [pose_error(pose, c) for c in candidates]
    return int(np.argmin(errs))


def aggregate(per_video: Mapping[str, Sequence[SwapEval]]) -> dict[str, tuple[float, float]]:
    """Per-video means first, then mean and population std across videos.

    The verification column is included only when every frame provides it.
    """
    if not per_video:
        raise ValidationError("aggregate needs at least one video")
    for vid, frames in per_video.items():
        if not frames:
            raise ValidationError(f"video {vid!r} has no frames")

    all_frames = [f for frames in per_video.values() for f in frames]
    with_verification = all(f.verification is not None for f in all_frames)

    per_metric_video_means: dict[str, list[float]] = {m: [] for m in METRIC_COLUMNS}
    for frames in per_video.values():
        per_metric_video_means["ssim"].append(float(np.mean([f.ssim for f in frames])))
        per_metric_video_means["euler"].append(
            float(np.mean([f.euler_err for f in frames]))
        )
        per_metric_video_means["landmarks"].append(
            float(np.mean([f.landmark_err for f in frames]))
        )
        if with_verification:
            per_metric_video_means["verification"].append(
                float(np.mean([f.verification for f in frames]))
            )

    out = {}
    for metric, means in per_metric_video_means.items():
        if not means:
            continue
        arr = np.asarray(means, dtype=np.float64)
        out[metric] = (float(arr.mean()), float(arr.std()))
    return out


def format_entry(mean: float, std: float) -> str:
    return f"{mean:.2f} ± {std:.2f}"


def format_table(stats: Mapping[str, tuple[float, float]]) -> dict[str, str]:
    """Render aggregate output as the familiar four-column table row."""
    return {
        metric: format_entry(*stats[metric])
        for metric in METRIC_COLUMNS
        if metric in stats
    }
