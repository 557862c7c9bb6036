"""Binary framing for external generator peers.

Frames travel over a byte stream (subprocess pipe or TCP socket) and are
fully self-describing:

====== ======= =====================================================
offset format  field
====== ======= =====================================================
0      4s      magic ``FSGN``
4      u8      protocol version (currently 1)
5      u8      generator role, ASCII ``r``/``s``/``c``/``b``
6      u16     plane count of the payload
8      u32     raster height
12     u32     raster width
====== ======= =====================================================

The 16-byte header is followed by ``planes * height * width`` little-endian
float32 samples, one plane after another.  Requests carry the image planes
(3) first, then one heatmap plane per landmark when the role consumes
landmarks (role ``r``).  Responses mirror the header and carry 3 image planes
plus one plane of segmentation class labels.

Anything that does not parse raises :class:`ProtocolError` before any pixel
is surfaced; a peer that answers with out-of-contract content raises
:class:`PeerError`.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import ProtocolError

MAGIC = b"FSGN"
VERSION = 1
ROLES = ("r", "s", "c", "b")

HEADER = struct.Struct("<4sBBHII")
HEADER_SIZE = HEADER.size  # 16 bytes

MAX_PLANES = 1024
MAX_DIM = 1 << 16


class PeerError(ProtocolError):
    """The peer spoke the protocol but violated the generator contract."""


def frame_size(planes: int, height: int, width: int) -> int:
    return HEADER_SIZE + 4 * planes * height * width


def encode_frame(role: str, planes: np.ndarray) -> bytes:
    """Serialize a (planes, H, W) float32 stack into one frame."""
    arr = np.ascontiguousarray(planes, dtype="<f4")
    if arr.ndim != 3:
        raise ProtocolError(f"frame payload must be (planes, H, W), got {arr.shape}")
    n, height, width = arr.shape
    if role not in ROLES:
        raise ProtocolError(f"unknown generator role {role!r}")
    if not 1 <= n <= MAX_PLANES:
        raise ProtocolError(f"plane count {n} outside [1, {MAX_PLANES}]")
    if not (1 <= height <= MAX_DIM and 1 <= width <= MAX_DIM):
        raise ProtocolError(f"raster {height}x{width} outside protocol limits")
    header = HEADER.pack(MAGIC, VERSION, ord(role), n, height, width)
    return header + arr.tobytes()


def parse_header(raw: bytes) -> tuple[str, int, int, int]:
    if len(raw) != HEADER_SIZE:
        raise ProtocolError(f"short header: {len(raw)} bytes")
    magic, version, role_byte, planes, height, width = HEADER.unpack(raw)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ProtocolError(f"unsupported protocol version {version}")
    role = chr(role_byte)
    if role not in ROLES:
        raise ProtocolError(f"unknown generator role byte {role_byte:#x}")
    if not 1 <= planes <= MAX_PLANES:
        raise ProtocolError(f"plane count {planes} outside [1, {MAX_PLANES}]")
    if height < 1 or width < 1 or height > MAX_DIM or width > MAX_DIM:
        raise ProtocolError(f"bad raster dimensions {height}x{width}")
    return role, planes, height, width


def decode_frame(raw: bytes) -> tuple[str, np.ndarray]:
    role, planes, height, width = parse_header(raw[:HEADER_SIZE])
    expected = frame_size(planes, height, width)
    if len(raw) != expected:
        raise ProtocolError(
            f"frame length {len(raw)} does not match header ({expected} expected)"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=HEADER_SIZE)
    return role, data.reshape(planes, height, width).copy()


def read_frame(read_exact) -> tuple[str, np.ndarray]:
    """Read one frame through ``read_exact(n) -> bytes``.

    ``read_exact`` must return exactly ``n`` bytes, raise ``EOFError`` when
    the stream ends cleanly at a frame boundary, and raise
    :class:`ProtocolError` on truncation or timeout.
    """
    header = read_exact(HEADER_SIZE)
    role, planes, height, width = parse_header(header)
    payload = read_exact(frame_size(planes, height, width) - HEADER_SIZE)
    data = np.frombuffer(payload, dtype="<f4")
    return role, data.reshape(planes, height, width).copy()


def stream_reader(stream):
    """``read_exact`` adapter over a blocking binary file object."""

    def read_exact(n: int) -> bytes:
        chunks = b""
        while len(chunks) < n:
            piece = stream.read(n - len(chunks))
            if not piece:
                if not chunks:
                    raise EOFError("peer closed the stream")
                raise ProtocolError(
                    f"truncated frame: wanted {n} bytes, got {len(chunks)}"
                )
            chunks += piece
        return chunks

    return read_exact


def write_frame(stream, role: str, planes: np.ndarray) -> None:
    stream.write(encode_frame(role, planes))
    stream.flush()
