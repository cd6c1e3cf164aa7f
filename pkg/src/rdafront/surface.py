"""Front-surface snapshots h(x, y) with finite-difference partials.

A FrontSurface stores one time level of the moving internal surface on
the periodic (x, y) sampling of a Grid3D. Slope fields h_x, h_y come
from central differences with periodic wrap; h_t is supplied by the
evolution solver (evaluated from the governing transport equation, which
is exact along characteristics, rather than by differencing snapshots).
The surface must stay inside the closed slab [0, a]; the evolution layer
enforces the strict interior for t > 0.
"""

from __future__ import annotations

import numpy as np

from .errors import FrontError
from .grid import Grid3D, _locate_xy


def periodic_gradient(values, hx, hy):
    """Central differences with periodic wrap in both axes."""
    gx = (np.roll(values, -1, axis=0) - np.roll(values, 1, axis=0)) / (2 * hx)
    gy = (np.roll(values, -1, axis=1) - np.roll(values, 1, axis=1)) / (2 * hy)
    return gx, gy


def periodic_second_derivatives(values, hx, hy):
    """(h_xx, h_yy, h_xy) by central differences with periodic wrap."""
    hxx = (np.roll(values, -1, axis=0) - 2 * values
           + np.roll(values, 1, axis=0)) / hx ** 2
    hyy = (np.roll(values, -1, axis=1) - 2 * values
           + np.roll(values, 1, axis=1)) / hy ** 2
    gx = (np.roll(values, -1, axis=0) - np.roll(values, 1, axis=0)) / (2 * hx)
    hxy = (np.roll(gx, -1, axis=1) - np.roll(gx, 1, axis=1)) / (2 * hy)
    return hxx, hyy, hxy


class FrontSurface:
    """One time level of the internal surface; immutable after creation."""

    __slots__ = ("grid", "h", "h_x", "h_y", "h_t", "time")

    def __init__(self, grid: Grid3D, h, h_t=None, time: float = 0.0,
                 tol: float = 1e-12, bounded: bool = True):
        h = np.ascontiguousarray(h, dtype=np.float64)
        if h.shape != (grid.nx, grid.ny):
            raise FrontError(
                f"surface shape {h.shape} != ({grid.nx}, {grid.ny})",
                operation="FrontSurface")
        if not np.all(np.isfinite(h)):
            raise FrontError("surface contains non-finite samples",
                             operation="FrontSurface")
        # bounded=False stores signed correction surfaces (h1 terms)
        if bounded and (np.any(h < -tol) or np.any(h > grid.depth + tol)):
            raise FrontError(
                f"surface leaves the slab [0, {grid.depth:.6g}]: "
                f"range [{h.min():.6g}, {h.max():.6g}]",
                operation="FrontSurface")
        h_x, h_y = periodic_gradient(h, grid.hx, grid.hy)
        if h_t is None:
            h_t = np.zeros_like(h)
        else:
            h_t = np.ascontiguousarray(h_t, dtype=np.float64)
            if h_t.shape != h.shape:
                raise FrontError("h_t shape mismatch", operation="FrontSurface")
        for arr in (h, h_x, h_y, h_t):
            arr.flags.writeable = False
        self.grid = grid
        self.h = h
        self.h_x = h_x
        self.h_y = h_y
        self.h_t = h_t
        self.time = float(time)

    def interior(self, margin: float = 0.0):
        """True when every sample satisfies margin < h < depth - margin."""
        return bool(np.all(self.h > margin)
                    and np.all(self.h < self.grid.depth - margin))

    def second_derivatives(self):
        return periodic_second_derivatives(self.h, self.grid.hx, self.grid.hy)

    def _bilinear(self, arr, x, y):
        i0, i1, wx, j0, j1, wy = _locate_xy(self.grid, x, y)
        return ((arr[i0, j0] * (1 - wx) + arr[i1, j0] * wx) * (1 - wy)
                + (arr[i0, j1] * (1 - wx) + arr[i1, j1] * wx) * wy)

    def sample(self, x, y):
        """h at arbitrary (x, y), bilinear with periodic wrap."""
        return self._bilinear(self.h, x, y)

    def sample_slopes(self, x, y):
        """(h_x, h_y) at arbitrary (x, y)."""
        return (self._bilinear(self.h_x, x, y),
                self._bilinear(self.h_y, x, y))

    def sample_ht(self, x, y):
        return self._bilinear(self.h_t, x, y)
