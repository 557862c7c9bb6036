"""Generator handles: the image+heatmap -> image+mask contract.

Every pipeline stage that the neural networks would serve is reached through
a :class:`GeneratorHandle`.  Built-in mocks make the full pipeline runnable
and testable without any trained model; external processes join over the
framed wire protocol, one in-flight request per handle.

Endpoint strings (config files, CLI flags, service payloads):

* ``mock:identity`` — echoes the input image, full-face mask;
* ``mock:constant:R,G,B`` — constant-color output, full-face mask;
* ``mock:counting[:delta]`` — adds ``delta`` (default 0.1) to the input,
  clamped; counts invocations;
* ``mock:face`` — renders the synthetic parametric face at the landmarks
  decoded from the request heatmap (an exact landmark mover);
* ``mock:segment-bg[:R,G,B]`` — passthrough image, face mask wherever the
  input differs from the given background color;
* ``exec:<command line>`` — spawn a peer subprocess speaking frames on
  stdin/stdout;
* ``tcp:<host>:<port>`` — connect to a peer over TCP.
"""

from __future__ import annotations

import os
import selectors
import shlex
import socket
import subprocess
import time
from dataclasses import dataclass

import numpy as np

from . import protocol
from .core import FACE, Image, SegMask
from .errors import ProtocolError, ValidationError
from .heatmaps import Heatmap, decode_landmarks
from .protocol import PeerError
from .synthetic import face_mask, render_face

DEFAULT_TIMEOUT = 30.0


@dataclass(frozen=True)
class GeneratorResult:
    image: Image
    mask: SegMask


class GeneratorHandle:
    """Base class: one request at a time, image in, image + mask out."""

    kind = "builtin-mock"

    def __init__(self, role: str = "r"):
        if role not in protocol.ROLES:
            raise ValidationError(f"unknown generator role {role!r}")
        self.role = role

    def generate(self, image: Image, heatmap: Heatmap | None = None) -> GeneratorResult:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


class IdentityGenerator(GeneratorHandle):
    """Echoes the input; marks every pixel as face."""

    def generate(self, image, heatmap=None):
        return GeneratorResult(image, SegMask.full(image.height, image.width, FACE))


class ConstantGenerator(GeneratorHandle):
    def __init__(self, color, role: str = "r"):
        super().__init__(role)
        self.color = tuple(float(c) for c in color)

    def generate(self, image, heatmap=None):
        out = np.empty_like(image.data)
        for c, v in enumerate(self.color[: image.channels]):
            out[:, :, c] = v
        return GeneratorResult(Image(out), SegMask.full(image.height, image.width, FACE))


class CountingGenerator(GeneratorHandle):
    """Adds a fixed offset per call (clamped); tracks the call count."""

    def __init__(self, delta: float = 0.1, role: str = "r"):
        super().__init__(role)
        self.delta = float(delta)
        self.calls = 0

    def generate(self, image, heatmap=None):
        self.calls += 1
        out = np.clip(image.data + np.float32(self.delta), 0.0, 1.0)
        return GeneratorResult(Image(out), SegMask.full(image.height, image.width, FACE))


class LandmarkFaceGenerator(GeneratorHandle):
    """Exact landmark mover: decodes target landmarks from the heatmap and
    re-renders the synthetic face there.  Records the decoded landmarks so
    tests can compare against the plan that produced them."""

    def __init__(self, role: str = "r"):
        super().__init__(role)
        self.applied_landmarks = []

    def generate(self, image, heatmap=None):
        if heatmap is None:
            raise ValidationError("landmark-face generator needs a heatmap")
        landmarks = decode_landmarks(heatmap)
        self.applied_landmarks.append(landmarks)
        rendered = render_face(landmarks, image.height, image.width)
        return GeneratorResult(rendered, face_mask(landmarks, image.height, image.width))


class BackgroundSegmenter(GeneratorHandle):
    """Passthrough image; face label wherever the input leaves the given
    constant background color.  Exact on synthetic scenes."""

    def __init__(self, background=(0.10, 0.12, 0.14), tol: float = 1e-6, role: str = "s"):
        super().__init__(role)
        self.background = np.asarray(background, dtype=np.float32)
        self.tol = float(tol)

    def generate(self, image, heatmap=None):
        bg = self.background[: image.channels]
        off = np.abs(image.data - bg[None, None, :]).max(axis=2) > self.tol
        labels = np.where(off, np.uint8(FACE), np.uint8(0))
        return GeneratorResult(image, SegMask(labels))


class _WireGenerator(GeneratorHandle):
    """Shared request/response logic for external peers."""

    kind = "external-process"

    def __init__(self, role: str, timeout: float = DEFAULT_TIMEOUT):
        super().__init__(role)
        self.timeout = float(timeout)

    def _transact(self, payload: np.ndarray) -> tuple[str, np.ndarray]:
        raise NotImplementedError

    def generate(self, image, heatmap=None):
        planes = [np.moveaxis(image.data, 2, 0)]
        if heatmap is not None:
            planes.append(heatmap.data)
        request = np.concatenate(planes, axis=0)
        role, response = self._transact(request)
        if role != self.role:
            raise PeerError(f"peer answered for role {role!r}, expected {self.role!r}")
        if response.shape[0] != image.channels + 1:
            raise PeerError(
                f"peer returned {response.shape[0]} planes, expected {image.channels + 1}"
            )
        if response.shape[1:] != (image.height, image.width):
            raise PeerError(
                f"peer returned raster {response.shape[1:]}, expected "
                f"{(image.height, image.width)}"
            )
        img_planes = response[: image.channels].astype(np.float64)
        if not np.isfinite(img_planes).all() or img_planes.min() < 0 or img_planes.max() > 1:
            raise PeerError("peer image samples outside [0, 1]")
        mask_plane = response[image.channels]
        labels = np.rint(mask_plane)
        if not np.isfinite(labels).all() or np.abs(mask_plane - labels).max() > 1e-3:
            raise PeerError("peer mask plane does not carry integer class labels")
        if labels.min() < 0 or labels.max() > 2:
            raise PeerError("peer mask labels outside {0, 1, 2}")
        out = Image(np.moveaxis(response[: image.channels], 0, 2))
        return GeneratorResult(out, SegMask(labels.astype(np.uint8)))


class ExternalProcessGenerator(_WireGenerator):
    """Generator served by a subprocess speaking frames on stdin/stdout."""

    def __init__(self, command, role: str, timeout: float = DEFAULT_TIMEOUT):
        super().__init__(role, timeout)
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        if not argv:
            raise ValidationError("empty generator command")
        try:
            # bufsize=0: reads must hit the OS pipe directly, otherwise the
            # selector would starve on bytes parked in a userspace buffer.
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                bufsize=0,
            )
        except OSError as exc:
            raise ProtocolError(f"cannot spawn generator peer {argv[0]!r}: {exc}") from exc
        os.set_blocking(self._proc.stdout.fileno(), False)
        self._selector = selectors.DefaultSelector()
        self._selector.register(self._proc.stdout, selectors.EVENT_READ)

    def _read_exact(self, n: int, deadline: float) -> bytes:
        buf = b""
        while len(buf) < n:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ProtocolError(f"generator peer timed out after {self.timeout}s")
            if not self._selector.select(remaining):
                continue
            piece = self._proc.stdout.read(n - len(buf))
            if piece is None:
                continue
            if piece == b"":
                raise ProtocolError(
                    f"generator peer closed the stream mid-frame "
                    f"({len(buf)}/{n} bytes)"
                )
            buf += piece
        return buf

    def _transact(self, payload):
        if self._proc.poll() is not None:
            raise ProtocolError(
                f"generator peer exited with status {self._proc.returncode}"
            )
        deadline = time.monotonic() + self.timeout
        try:
            self._proc.stdin.write(protocol.encode_frame(self.role, payload))
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ProtocolError(f"generator peer pipe failed: {exc}") from exc
        return protocol.read_frame(lambda n: self._read_exact(n, deadline))

    def close(self):
        try:
            self._selector.close()
        except Exception:
            pass
        if self._proc.poll() is None:
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=2.0)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()


class TcpGenerator(_WireGenerator):
    """Generator served by a TCP peer."""

    def __init__(self, host: str, port: int, role: str, timeout: float = DEFAULT_TIMEOUT):
        super().__init__(role, timeout)
        try:
            self._sock = socket.create_connection((host, port), timeout=self.timeout)
        except OSError as exc:
            raise ProtocolError(f"cannot connect to {host}:{port}: {exc}") from exc
        self._sock.settimeout(self.timeout)

    def _read_exact(self, n: int) -> bytes:
        buf = b""
        while len(buf) < n:
            try:
                piece = self._sock.recv(n - len(buf))
            except socket.timeout:
                raise ProtocolError(f"generator peer timed out after {self.timeout}s")
            if not piece:
                raise ProtocolError(
                    f"generator peer closed the connection mid-frame ({len(buf)}/{n})"
                )
            buf += piece
        return buf

    def _transact(self, payload):
        try:
            self._sock.sendall(protocol.encode_frame(self.role, payload))
        except OSError as exc:
            raise ProtocolError(f"generator peer socket failed: {exc}") from exc
        return protocol.read_frame(self._read_exact)

    def close(self):
        try:
            self._sock.close()
        except OSError:
            pass


def _parse_color(text: str):
    parts = [float(p) for p in text.split(",")]
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise ValidationError(f"expected 1 or 3 color components, got {text!r}")
    return tuple(parts)


def make_generator(endpoint: str, role: str, timeout: float = DEFAULT_TIMEOUT) -> GeneratorHandle:
    """Build a handle from an endpoint string (see module docstring)."""
    if endpoint.startswith("mock:"):
        spec = endpoint[len("mock:"):]
        name, _, arg = spec.partition(":")
        if name == "identity":
            return IdentityGenerator(role)
        if name == "constant":
            return ConstantGenerator(_parse_color(arg or "0.5"), role)
        if name == "counting":
            return CountingGenerator(float(arg) if arg else 0.1, role)
        if name == "face":
            return LandmarkFaceGenerator(role)
        if name == "segment-bg":
            if arg:
                return BackgroundSegmenter(_parse_color(arg), role=role)
            return BackgroundSegmenter(role=role)
        raise ValidationError(f"unknown mock generator {name!r}")
    if endpoint.startswith("exec:"):
        return ExternalProcessGenerator(endpoint[len("exec:"):], role, timeout)
    if endpoint.startswith("tcp:"):
        rest = endpoint[len("tcp:"):]
        host, _, port = rest.rpartition(":")
        if not host or not port.isdigit():
            raise ValidationError(f"bad tcp endpoint {endpoint!r}")
        return TcpGenerator(host, int(port), role, timeout)
    raise ValidationError(f"unknown generator endpoint {endpoint!r}")
