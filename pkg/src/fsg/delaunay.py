"""Planar Delaunay triangulation with robust predicates.

Size is tiny here (a few hundred pose points at most), so the design favors
robustness and determinism over asymptotics: orientation and in-circle tests
run in floating point with a conservative error bound and fall back to exact
rational arithmetic when the float result is not trustworthy, and point
location is a brute-force scan in triangle-index order.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .errors import ValidationError

_EPS = float(np.finfo(np.float64).eps)
_ORIENT_BOUND = 8.0 * _EPS
_INCIRCLE_BOUND = 16.0 * _EPS


def orient2d(a, b, c) -> int:
    """Sign of the signed area of (a, b, c): +1 ccw, -1 cw, 0 collinear."""
    detleft = (a[0] - c[0]) * (b[1] - c[1])
    detright = (a[1] - c[1]) * (b[0] - c[0])
    det = detleft - detright
    if abs(det) > _ORIENT_BOUND * (abs(detleft) + abs(detright)):
        return 1 if det > 0 else -1
    return _orient2d_exact(a, b, c)


def _orient2d_exact(a, b, c) -> int:
    ax, ay = Fraction(a[0]), Fraction(a[1])
    bx, by = Fraction(b[0]), Fraction(b[1])
    cx, cy = Fraction(c[0]), Fraction(c[1])
    det = (ax - cx) * (by - cy) - (ay - cy) * (bx - cx)
    return (det > 0) - (det < 0)


def incircle(a, b, c, d) -> int:
    """For a ccw triangle (a, b, c): +1 if d lies strictly inside its
    circumcircle, -1 strictly outside, 0 on the circle."""
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]

    bdxcdy, cdxbdy = bdx * cdy, cdx * bdy
    cdxady, adxcdy = cdx * ady, adx * cdy
    adxbdy, bdxady = adx * bdy, bdx * ady
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy

    det = (
        alift * (bdxcdy - cdxbdy)
        + blift * (cdxady - adxcdy)
        + clift * (adxbdy - bdxady)
    )
    permanent = (
        alift * (abs(bdxcdy) + abs(cdxbdy))
        + blift * (abs(cdxady) + abs(adxcdy))
        + clift * (abs(adxbdy) + abs(bdxady))
    )
    if abs(det) > _INCIRCLE_BOUND * permanent:
        return 1 if det > 0 else -1
    return _incircle_exact(a, b, c, d)


def _incircle_exact(a, b, c, d) -> int:
    dx, dy = Fraction(d[0]), Fraction(d[1])
    adx, ady = Fraction(a[0]) - dx, Fraction(a[1]) - dy
    bdx, bdy = Fraction(b[0]) - dx, Fraction(b[1]) - dy
    cdx, cdy = Fraction(c[0]) - dx, Fraction(c[1]) - dy
    det = (
        (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy)
        + (bdx * bdx + bdy * bdy) * (cdx * ady - adx * cdy)
        + (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady)
    )
    return (det > 0) - (det < 0)


def triangulate_in_box(points: np.ndarray, box_start: int) -> list[tuple[int, int, int]]:
    """Delaunay triangulation of ``points`` where ``points[box_start:]`` are
    the four corners of an axis-aligned box (in ccw order) that strictly or
    weakly contains every other point.

    Runs incremental Bowyer-Watson insertion seeded with the two corner
    triangles; every returned triangle is ccw.
    """
    n = len(points)
    if n != box_start + 4:
        raise ValidationError("expected exactly four box corners")
    c0, c1, c2, c3 = range(box_start, box_start + 4)
    triangles = [(c0, c1, c2), (c0, c2, c3)]

    for i in range(box_start):
        p = points[i]
        cavity = [
            t
            for t in triangles
            if incircle(points[t[0]], points[t[1]], points[t[2]], p) > 0
        ]
        if not cavity:
            raise ValidationError(
                f"point {tuple(p)} duplicates an existing vertex or lies outside the box"
            )
        edge_count: dict[tuple[int, int], int] = {}
        for ta, tb, tc in cavity:
            for e in ((ta, tb), (tb, tc), (tc, ta)):
                edge_count[e] = edge_count.get(e, 0) + 1
        boundary = [
            e for e, cnt in edge_count.items()
            if cnt == 1 and (e[1], e[0]) not in edge_count
        ]
        remaining = [t for t in triangles if t not in cavity]
        triangles = remaining + [(ea, eb, i) for ea, eb in boundary]

    triangles.sort()
    return triangles


def triangle_area2(points: np.ndarray, tri) -> float:
    """Twice the signed area (positive for ccw triangles)."""
    a, b, c = (points[i] for i in tri)
    return float((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))


def contains_point(points: np.ndarray, tri, p) -> bool:
    """Closed point-in-triangle test with robust orientation signs."""
    a, b, c = (points[i] for i in tri)
    return orient2d(a, b, p) >= 0 and orient2d(b, c, p) >= 0 and orient2d(c, a, p) >= 0


def barycentric(points: np.ndarray, tri, p) -> np.ndarray:
    """Barycentric coordinates of ``p`` with respect to triangle ``tri``."""
    a, b, c = (points[i] for i in tri)
    det = (b[1] - c[1]) * (a[0] - c[0]) + (c[0] - b[0]) * (a[1] - c[1])
    if det == 0.0:
        raise ValidationError("degenerate triangle in barycentric query")
    la = ((b[1] - c[1]) * (p[0] - c[0]) + (c[0] - b[0]) * (p[1] - c[1])) / det
    lb = ((c[1] - a[1]) * (p[0] - c[0]) + (a[0] - c[0]) * (p[1] - c[1])) / det
    return np.array([la, lb, 1.0 - la - lb], dtype=np.float64)
