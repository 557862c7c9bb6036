"""Gradient-domain blending.

``blend`` minimizes ``||∇f - ∇source||²`` over the free pixels subject to
``f = target`` on every constrained pixel.  Discretely this is the 5-point
Poisson system ``Δf = Δsource`` with Dirichlet data from the target, using
degree-aware stencils on the raster border (natural boundary), which is the
exact normal-equation system of the forward-difference energy.

Solvers: a sparse direct factorization for small systems and a hand-rolled
Jacobi-preconditioned conjugate gradient for large ones.  Iteration order is
fixed, so a given method reproduces its output bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
from scipy.sparse.linalg import spsolve

from .core import Image, SegMask, FACE, HAIR, require_same_shape
from .errors import ConvergenceError, ValidationError

DIRECT_CUTOFF = 4096
DEFAULT_TOL = 1e-6

METHOD_DIRECT = "direct"
METHOD_CG = "conjugate-gradient"


@dataclass(frozen=True)
class BlendProblem:
    """Target frame, source to take gradients from, and the transfer mask
    (True = free pixel, False = Dirichlet-constrained to the target)."""

    target: Image
    source: Image
    mask: np.ndarray

    def __post_init__(self):
        require_same_shape(self.target.data, self.source.data, "blend rasters")
        m = np.asarray(self.mask)
        if m.shape != self.target.data.shape[:2]:
            raise ValidationError(
                f"mask shape {m.shape} must match raster {self.target.data.shape[:2]}"
            )
        m = m.astype(bool)
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)


@dataclass(frozen=True)
class SolverReport:
    iterations: int
    residual: float
    method: str
    converged: bool
    tol: float


def transfer_mask(seg: SegMask, hair_as_free: bool = False) -> np.ndarray:
    """Free-pixel mask from a segmentation: face pixels, optionally hair too."""
    free = seg.labels == FACE
    if hair_as_free:
        free = free | (seg.labels == HAIR)
    return free


def discrete_gradient(img) -> tuple[np.ndarray, np.ndarray]:
    """Forward differences; zero on the last column (gx) / last row (gy)."""
    arr = img.data if isinstance(img, Image) else np.asarray(img)
    arr = arr.astype(np.float64)
    if arr.shape[0] < 2 or arr.shape[1] < 2:
        raise ValidationError("gradient needs at least a 2x2 raster")
    gx = np.zeros_like(arr)
    gy = np.zeros_like(arr)
    gx[:, :-1] = arr[:, 1:] - arr[:, :-1]
    gy[:-1, :] = arr[1:, :] - arr[:-1, :]
    return gx, gy


def _neighbor_sum(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    out[:-1, :] += a[1:, :]
    out[1:, :] += a[:-1, :]
    out[:, :-1] += a[:, 1:]
    out[:, 1:] += a[:, :-1]
    return out


def _degree_grid(height: int, width: int) -> np.ndarray:
    return _neighbor_sum(np.ones((height, width), dtype=np.float64))


def solve_blend(
    problem: BlendProblem,
    tol: float = DEFAULT_TOL,
    max_iter: int | None = None,
    method: str = "auto",
) -> tuple[np.ndarray, SolverReport]:
    """Per-channel solve of the constrained gradient-matching system.

    Returns the raw float64 minimizer (target values on constrained pixels,
    no range clamping) and a solver report.  Raises ConvergenceError if the
    conjugate gradient misses ``tol`` within ``max_iter`` iterations.
    """
    if not tol > 0:
        raise ValidationError(f"tolerance must be positive, got {tol}")

    free = problem.mask
    height, width, channels = problem.target.data.shape
    n_free = int(free.sum())

    if method == "auto":
        method = METHOD_DIRECT if n_free < DIRECT_CUTOFF else METHOD_CG
    if method not in (METHOD_DIRECT, METHOD_CG):
        raise ValidationError(f"unknown solver method {method!r}")

    if n_free == 0:
        report = SolverReport(0, 0.0, method, True, tol)
        return problem.target.data.astype(np.float64), report

    if n_free == height * width:
        # No Dirichlet data anywhere: the source itself minimizes the energy.
        report = SolverReport(0, 0.0, method, True, tol)
        return problem.source.data.astype(np.float64), report

    if max_iter is None:
        max_iter = int(10 * np.sqrt(n_free)) + 1000

    deg = _degree_grid(height, width)
    constrained = ~free
    result = problem.target.data.astype(np.float64).copy()
    iterations = 0
    residual = 0.0

    for c in range(channels):
        s = problem.source.data[:, :, c].astype(np.float64)
        t = problem.target.data[:, :, c].astype(np.float64)
        b = deg * s - _neighbor_sum(s) + _neighbor_sum(np.where(constrained, t, 0.0))
        b = np.where(free, b, 0.0)

        if method == METHOD_DIRECT:
            x, its, res = _solve_direct(b, deg, free)
        else:
            x, its, res = _solve_cg(b, deg, free, s, tol, max_iter)
        if res > tol:
            report = SolverReport(its, res, method, False, tol)
            raise ConvergenceError(
                f"{method} solve stalled at residual {res:.3e} "
                f"after {its} iterations (tol {tol:.1e})",
                report=report,
            )
        iterations = max(iterations, its)
        residual = max(residual, res)
        result[:, :, c] = np.where(free, x, t)

    report = SolverReport(iterations, residual, method, True, tol)
    return result, report


def blend(
    problem: BlendProblem,
    tol: float = DEFAULT_TOL,
    max_iter: int | None = None,
    method: str = "auto",
) -> tuple[Image, SolverReport]:
    """Blend and produce a valid image.

    The report's residual reflects the un-clamped solution; the returned
    image is clamped to [0, 1] afterwards, with Dirichlet pixels reproducing
    the target bitwise.
    """
    result, report = solve_blend(problem, tol=tol, max_iter=max_iter, method=method)
    result = result.copy()
    np.clip(result, 0.0, 1.0, out=result)
    out = result.astype(np.float32)
    constrained = ~problem.mask
    out[constrained, :] = problem.target.data[constrained, :]
    return Image(out), report


def _apply_stencil(x: np.ndarray, deg: np.ndarray, free: np.ndarray) -> np.ndarray:
    # x is zero on constrained pixels, so the neighbor sum only gathers
    # free-pixel unknowns; constrained couplings already live in the RHS.
    return np.where(free, deg * x - _neighbor_sum(x), 0.0)


def _solve_cg(b, deg, free, source, tol, max_iter):
    x = np.where(free, source, 0.0)
    r = b - _apply_stencil(x, deg, free)
    res = float(np.sqrt((r * r).sum()))
    if res <= tol:
        return x, 0, res

    z = np.where(free, r / deg, 0.0)
    p = z
    rz = float((r * z).sum())
    for k in range(1, max_iter + 1):
        ap = _apply_stencil(p, deg, free)
        alpha = rz / float((p * ap).sum())
        x = x + alpha * p
        r = r - alpha * ap
        res = float(np.sqrt((r * r).sum()))
        if res <= tol:
            return x, k, res
        z = np.where(free, r / deg, 0.0)
        rz_next = float((r * z).sum())
        p = z + (rz_next / rz) * p
        rz = rz_next
    return x, max_iter, res


def _solve_direct(b, deg, free):
    height, width = free.shape
    ordinal = -np.ones((height, width), dtype=np.int64)
    ys, xs = np.nonzero(free)
    n = ys.size
    ordinal[ys, xs] = np.arange(n)

    rows = [np.arange(n)]
    cols = [np.arange(n)]
    vals = [deg[ys, xs]]
    for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        ny, nx = ys + dy, xs + dx
        ok = (ny >= 0) & (ny < height) & (nx >= 0) & (nx < width)
        ok[ok] &= free[ny[ok], nx[ok]]
        rows.append(ordinal[ys[ok], xs[ok]])
        cols.append(ordinal[ny[ok], nx[ok]])
        vals.append(np.full(int(ok.sum()), -1.0))

    mat = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    rhs = b[ys, xs]
    sol = spsolve(mat, rhs)
    x = np.zeros_like(b)
    x[ys, xs] = sol
    res = float(np.sqrt(((rhs - mat @ sol) ** 2).sum()))
    return x, 0, res
