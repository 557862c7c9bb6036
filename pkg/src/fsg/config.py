"""Plain-text config and manifest schemas.

Config files are ``key = value`` lines (``#`` comments allowed)::

    step_budget = 15
    prune_radius = 5
    tol = 1e-6
    hair_as_free = false
    gen_r = mock:face
    gen_s = mock:segment-bg
    gen_c = mock:identity
    # gen_b is optional; without it the Poisson solve blends
    occlusion_count = 1 3        # presence of occlusion_* keys enables it

Manifests are line-oriented, whitespace separated, one record per line, with
paths resolved relative to the manifest file.  An optional first comment of
the form ``# fsg <kind> v1`` pins the schema.  Kinds:

* ``views``:   ``id image_path landmarks_path yaw pitch roll [blur]``
* ``targets``: ``image_path landmarks_path yaw pitch roll``
* ``frames``:  ``id yaw pitch roll blur coverage [landmarks_path]``
  (``-`` marks an absent blur score)
* ``eval``:    ``video_id result_path reference_path result_pose_path
  target_pose_path result_landmarks_path target_landmarks_path
  [verification]``

Landmark/pose files use the core text formats; images may be PNG or
``.fsim``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .appearance import SourceView
from .core import EulerPose, pose_to_plane
from .curation import FrameRecord
from .errors import ValidationError
from .io import read_image, read_landmark_file, read_pose_file
from .masks import OcclusionSpec
from .pipeline import SwapConfig, TargetFrame

_HEADER_RE = re.compile(r"^#\s*fsg\s+(\w+)\s+v(\d+)\s*$")

_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def _manifest_lines(path, kind: str):
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            m = _HEADER_RE.match(stripped)
            if m and (m.group(1) != kind or m.group(2) != "1"):
                raise ValidationError(
                    f"{path}: manifest declares '{m.group(1)} v{m.group(2)}', "
                    f"expected '{kind} v1'"
                )
            continue
        yield lineno, stripped.split()


def _float(path, lineno, token, what):
    try:
        return float(token)
    except ValueError:
        raise ValidationError(f"{path}:{lineno}: bad {what} {token!r}")


def parse_config(path) -> SwapConfig:
    """Parse a key=value config file into a SwapConfig."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in stripped.split("=", 1))
        values[key] = value
    return config_from_mapping(values, origin=str(path))


def config_from_mapping(values: dict[str, str], origin: str = "<config>") -> SwapConfig:
    known = {
        "step_budget", "prune_radius", "blur_threshold", "tol", "max_iter",
        "hair_as_free", "sigma", "bound", "flip_fill", "flip_symmetry",
        "timeout", "occlusion_count", "occlusion_semi_axis",
        "occlusion_aspect", "occlusion_seed", "gen_r", "gen_s", "gen_c",
        "gen_b",
    }
    unknown = set(values) - known
    if unknown:
        raise ValidationError(f"{origin}: unknown config keys {sorted(unknown)}")

    def fval(key, default):
        return float(values[key]) if key in values else default

    def bval(key, default):
        if key not in values:
            return default
        token = values[key].lower()
        if token not in _BOOL:
            raise ValidationError(f"{origin}: bad boolean {values[key]!r} for {key}")
        return _BOOL[token]

    def pair(key, cast, default):
        if key not in values:
            return default
        parts = values[key].split()
        if len(parts) != 2:
            raise ValidationError(f"{origin}: {key} needs two values")
        return (cast(parts[0]), cast(parts[1]))

    occlusion = None
    if any(k.startswith("occlusion_") for k in values):
        occlusion = OcclusionSpec(
            count=pair("occlusion_count", int, (1, 3)),
            semi_axis=pair("occlusion_semi_axis", float, (0.05, 0.25)),
            aspect=pair("occlusion_aspect", float, (0.3, 1.0)),
            seed=int(values.get("occlusion_seed", 0)),
        )

    generators = {}
    for role in "rscb":
        key = f"gen_{role}"
        if key in values:
            generators[role] = values[key]

    max_iter = int(values["max_iter"]) if "max_iter" in values else None
    blur = fval("blur_threshold", None) if "blur_threshold" in values else None
    sigma = fval("sigma", None) if "sigma" in values else None

    flip_symmetry = None
    if "flip_symmetry" in values:
        token = values["flip_symmetry"]
        if token == "builtin":
            from .synthetic import symmetry_permutation

            flip_symmetry = tuple(int(i) for i in symmetry_permutation())
        else:
            try:
                indices = Path(token).read_text().split()
                flip_symmetry = tuple(int(i) for i in indices)
            except (OSError, ValueError) as exc:
                raise ValidationError(
                    f"{origin}: flip_symmetry must be 'builtin' or an index file: {exc}"
                )

    return SwapConfig(
        step_budget=fval("step_budget", 15.0),
        prune_radius=fval("prune_radius", 5.0),
        blur_threshold=blur,
        occlusion=occlusion,
        tol=fval("tol", 1e-6),
        max_iter=max_iter,
        hair_as_free=bval("hair_as_free", False),
        sigma=sigma,
        bound=fval("bound", 75.0),
        flip_fill=bval("flip_fill", True),
        flip_symmetry=flip_symmetry,
        generators=generators,
        timeout=fval("timeout", 30.0),
    )


@dataclass(frozen=True)
class ViewRow:
    view_id: str
    image_path: str | None
    landmarks_path: str | None
    pose: EulerPose
    blur: float | None


def read_views_manifest(path) -> list[ViewRow]:
    rows = []
    base = Path(path).parent
    for lineno, tokens in _manifest_lines(path, "views"):
        if len(tokens) not in (6, 7):
            raise ValidationError(
                f"{path}:{lineno}: views row needs 6 or 7 fields, got {len(tokens)}"
            )
        vid, image_path, lm_path = tokens[0], tokens[1], tokens[2]
        yaw, pitch, roll = (_float(path, lineno, t, "angle") for t in tokens[3:6])
        blur = _float(path, lineno, tokens[6], "blur score") if len(tokens) == 7 else None
        rows.append(
            ViewRow(
                view_id=vid,
                image_path=None if image_path == "-" else str(base / image_path),
                landmarks_path=None if lm_path == "-" else str(base / lm_path),
                pose=EulerPose(yaw, pitch, roll),
                blur=blur,
            )
        )
    if not rows:
        raise ValidationError(f"{path}: empty views manifest")
    return rows


def load_source_views(rows: list[ViewRow]) -> list[SourceView]:
    views = []
    for row in rows:
        if row.image_path is None:
            raise ValidationError(f"view {row.view_id!r} has no image path")
        landmarks = None
        if row.landmarks_path is not None:
            landmarks = read_landmark_file(row.landmarks_path)[0]
        views.append(
            SourceView(
                view_id=row.view_id,
                image=read_image(row.image_path),
                pose=row.pose,
                landmarks=landmarks,
                blur=row.blur,
            )
        )
    return views


def read_targets_manifest(path) -> list[TargetFrame]:
    frames = []
    base = Path(path).parent
    for lineno, tokens in _manifest_lines(path, "targets"):
        if len(tokens) != 5:
            raise ValidationError(
                f"{path}:{lineno}: targets row needs 5 fields, got {len(tokens)}"
            )
        yaw, pitch, roll = (_float(path, lineno, t, "angle") for t in tokens[2:5])
        frames.append(
            TargetFrame(
                image=read_image(base / tokens[0]),
                landmarks=read_landmark_file(base / tokens[1])[0],
                pose=EulerPose(yaw, pitch, roll),
            )
        )
    if not frames:
        raise ValidationError(f"{path}: empty targets manifest")
    return frames


def read_frames_manifest(path) -> list[FrameRecord]:
    records = []
    base = Path(path).parent
    for lineno, tokens in _manifest_lines(path, "frames"):
        if len(tokens) not in (6, 7):
            raise ValidationError(
                f"{path}:{lineno}: frames row needs 6 or 7 fields, got {len(tokens)}"
            )
        yaw, pitch, roll = (_float(path, lineno, t, "angle") for t in tokens[1:4])
        blur = None if tokens[4] == "-" else _float(path, lineno, tokens[4], "blur")
        coverage = _float(path, lineno, tokens[5], "coverage")
        landmarks = None
        if len(tokens) == 7 and tokens[6] != "-":
            landmarks = read_landmark_file(base / tokens[6])[0]
        records.append(
            FrameRecord(
                frame_id=tokens[0],
                point=pose_to_plane(EulerPose(yaw, pitch, roll)),
                roll=roll,
                blur=blur,
                coverage=coverage,
                landmarks=landmarks,
            )
        )
    if not records:
        raise ValidationError(f"{path}: empty frames manifest")
    return records


@dataclass(frozen=True)
class EvalRow:
    video_id: str
    result_path: str
    reference_path: str
    result_pose_path: str
    target_pose_path: str
    result_landmarks_path: str
    target_landmarks_path: str
    verification: float | None


def read_eval_manifest(path) -> list[EvalRow]:
    rows = []
    base = Path(path).parent
    for lineno, tokens in _manifest_lines(path, "eval"):
        if len(tokens) not in (7, 8):
            raise ValidationError(
                f"{path}:{lineno}: eval row needs 7 or 8 fields, got {len(tokens)}"
            )
        verification = (
            _float(path, lineno, tokens[7], "verification") if len(tokens) == 8 else None
        )
        rows.append(
            EvalRow(
                video_id=tokens[0],
                result_path=str(base / tokens[1]),
                reference_path=str(base / tokens[2]),
                result_pose_path=str(base / tokens[3]),
                target_pose_path=str(base / tokens[4]),
                result_landmarks_path=str(base / tokens[5]),
                target_landmarks_path=str(base / tokens[6]),
                verification=verification,
            )
        )
    if not rows:
        raise ValidationError(f"{path}: empty eval manifest")
    return rows


def evaluate_rows(rows: list[EvalRow]):
    """Per-video SwapEval groups from an eval manifest."""
    from .metrics import SwapEval, landmark_error, pose_error, ssim

    grouped: dict[str, list] = {}
    for row in rows:
        result = read_image(row.result_path)
        reference = read_image(row.reference_path)
        result_pose = read_pose_file(row.result_pose_path)[0]
        target_pose = read_pose_file(row.target_pose_path)[0]
        result_lm = read_landmark_file(row.result_landmarks_path)[0]
        target_lm = read_landmark_file(row.target_landmarks_path)[0]
        grouped.setdefault(row.video_id, []).append(
            SwapEval(
                ssim=ssim(result, reference),
                euler_err=pose_error(result_pose, target_pose),
                landmark_err=landmark_error(result_lm, target_lm),
                verification=row.verification,
            )
        )
    return grouped
