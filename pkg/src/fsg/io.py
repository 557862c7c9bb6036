"""File formats.

Text formats (one record per line, whitespace separated):

* landmark file: ``N x1 y1 x2 y2 ... xN yN`` — one face per line;
* pose file: ``yaw pitch roll`` — one pose per line.

Raster formats:

* PNG, 8-bit gray or RGB.  Writing converts ``[0, 1]`` floats with
  round-half-to-even; reading divides by 255.
* ``.fsim`` — lossless raw float32 rasters for test fixtures and bit-exact
  outputs.  Layout (little-endian): magic ``FSIM``, u32 version=1, u32 height,
  u32 width, u32 channels, then ``C*H*W`` float32 samples in planar
  (channel-major) order.
* masks serialize as single-channel 8-bit PNGs holding the raw labels
  {0, 1, 2}.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .core import HAIR, EulerPose, Image, LandmarkSet, SegMask
from .errors import ValidationError

FSIM_MAGIC = b"FSIM"
FSIM_VERSION = 1
_FSIM_HEADER = struct.Struct("<4sIIII")


def read_landmark_file(path) -> list[LandmarkSet]:
    """Read every face line of a landmark file."""
    faces = []
    for lineno, line in enumerate(_data_lines(path), start=1):
        tokens = line.split()
        try:
            n = int(tokens[0])
            values = [float(t) for t in tokens[1:]]
        except (ValueError, IndexError):
            raise ValidationError(f"{path}:{lineno}: malformed landmark line")
        if len(values) != 2 * n:
            raise ValidationError(
                f"{path}:{lineno}: expected {2 * n} coordinates, got {len(values)}"
            )
        faces.append(LandmarkSet(np.array(values, dtype=np.float64).reshape(n, 2)))
    if not faces:
        raise ValidationError(f"{path}: no landmark records")
    return faces


def write_landmark_file(path, faces) -> None:
    if isinstance(faces, LandmarkSet):
        faces = [faces]
    lines = []
    for face in faces:
        coords = " ".join(repr(float(v)) for v in face.points.ravel())
        lines.append(f"{len(face)} {coords}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_pose_file(path) -> list[EulerPose]:
    poses = []
    for lineno, line in enumerate(_data_lines(path), start=1):
        tokens = line.split()
        if len(tokens) != 3:
            raise ValidationError(f"{path}:{lineno}: pose line needs 3 angles")
        try:
            yaw, pitch, roll = (float(t) for t in tokens)
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: malformed pose line")
        poses.append(EulerPose(yaw, pitch, roll))
    if not poses:
        raise ValidationError(f"{path}: no pose records")
    return poses


def write_pose_file(path, poses) -> None:
    if isinstance(poses, EulerPose):
        poses = [poses]
    lines = [f"{p.yaw!r} {p.pitch!r} {p.roll!r}" for p in poses]
    Path(path).write_text("\n".join(lines) + "\n")


def _data_lines(path):
    text = Path(path).read_text()
    for line in text.splitlines():
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            yield stripped


def quantize_u8(data: np.ndarray) -> np.ndarray:
    """[0, 1] floats to 8-bit with round-half-to-even."""
    return np.rint(np.asarray(data, dtype=np.float64) * 255.0).astype(np.uint8)


def read_image(path) -> Image:
    path = Path(path)
    if path.suffix.lower() == ".fsim":
        return read_fsim(path)
    with PILImage.open(path) as img:
        if img.mode not in ("L", "RGB"):
            img = img.convert("RGB")
        arr = np.asarray(img, dtype=np.float32) / 255.0
    return Image(arr)


def write_image(path, image: Image) -> None:
    path = Path(path)
    if path.suffix.lower() == ".fsim":
        write_fsim(path, image)
        return
    arr = quantize_u8(image.data)
    if arr.shape[2] == 1:
        PILImage.fromarray(arr[:, :, 0], mode="L").save(path)
    else:
        PILImage.fromarray(arr, mode="RGB").save(path)


def read_fsim(path) -> Image:
    raw = Path(path).read_bytes()
    if len(raw) < _FSIM_HEADER.size:
        raise ValidationError(f"{path}: truncated fsim header")
    magic, version, height, width, channels = _FSIM_HEADER.unpack_from(raw)
    if magic != FSIM_MAGIC:
        raise ValidationError(f"{path}: not an fsim file")
    if version != FSIM_VERSION:
        raise ValidationError(f"{path}: unsupported fsim version {version}")
    count = height * width * channels
    expected = _FSIM_HEADER.size + 4 * count
    if len(raw) != expected:
        raise ValidationError(
            f"{path}: fsim payload size mismatch ({len(raw)} vs {expected} bytes)"
        )
    planes = np.frombuffer(raw, dtype="<f4", offset=_FSIM_HEADER.size, count=count)
    planes = planes.reshape(channels, height, width)
    return Image(np.moveaxis(planes, 0, 2))


def write_fsim(path, image: Image) -> None:
    planes = np.ascontiguousarray(np.moveaxis(image.data, 2, 0), dtype="<f4")
    header = _FSIM_HEADER.pack(
        FSIM_MAGIC, FSIM_VERSION, image.height, image.width, image.channels
    )
    Path(path).write_bytes(header + planes.tobytes())


def read_mask(path) -> SegMask:
    with PILImage.open(path) as img:
        arr = np.asarray(img.convert("L"))
    if arr.max(initial=0) > HAIR:
        # Tolerate 0/255-style binary masks by collapsing nonzero to face.
        arr = (arr > 0).astype(np.uint8)
    return SegMask(arr)


def read_binary_mask(path) -> np.ndarray:
    """8-bit raster where nonzero marks a free/selected pixel."""
    with PILImage.open(path) as img:
        arr = np.asarray(img.convert("L"))
    return arr > 0


def write_mask(path, mask: SegMask) -> None:
    PILImage.fromarray(mask.labels, mode="L").save(path)
