"""Reference echo peer.

Reads request frames from stdin and answers each with the request's image
planes unchanged plus an all-face mask plane — behaviorally identical to the
built-in identity mock, which makes it the conformance fixture for the wire
protocol.  Run with ``python -m fsg.peers.echo``.
"""

from __future__ import annotations

import sys

import numpy as np

from .. import protocol


def serve(stdin, stdout) -> int:
    read_exact = protocol.stream_reader(stdin)
    while True:
        try:
            role, planes = protocol.read_frame(read_exact)
        except EOFError:
            return 0
        image = planes[:3]
        mask = np.ones((1,) + image.shape[1:], dtype=np.float32)
        protocol.write_frame(stdout, role, np.concatenate([image, mask], axis=0))


def main() -> int:
    return serve(sys.stdin.buffer, sys.stdout.buffer)


if __name__ == "__main__":
    sys.exit(main())
