"""Structured box grid, scalar fields, and the error metric.

The domain is the box [x0, x0+L] x [y0, y0+M] x [0, a]. The x and y axes
are periodic and cell-sampled without a duplicated seam (sample i sits at
x0 + i*L/nx), which makes periodic wrap-around unambiguous. The z axis
carries Dirichlet data on both faces, so it is node-centered with both
endpoints present (spacing a/(nz-1)).

Field values are stored as float64 arrays of shape (nx, ny, nz) indexed
[i, j, k]; the on-disk order (one value per line) flattens x fastest,
then y, then z, i.e. flat index i + nx*(j + ny*k). Fields are frozen
after construction: every operation here is pure and safe to call from
concurrent readers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CoreError, DegenerateReferenceError, OutOfDomainError


def wrap_periodic(x, origin, period):
    """Map x into [origin, origin+period) preserving x mod period.

    Accepts scalars or arrays. Raises on a non-positive period.
    """
    if period <= 0:
        raise CoreError(f"period must be positive, got {period}",
                        operation="wrap_periodic")
    wrapped = x - period * np.floor((np.asarray(x, dtype=float) - origin)
                                    / period)
    # guard the half-open contract against rounding up to origin+period
    wrapped = np.where(wrapped >= origin + period, origin, wrapped)
    if np.ndim(x) == 0:
        return float(wrapped)
    return wrapped


@dataclass(frozen=True)
class Grid3D:
    """Structured grid over the periodic box; immutable."""

    nx: int
    ny: int
    nz: int
    x0: float
    length_x: float   # period L
    y0: float
    length_y: float   # period M
    depth: float      # z-extent a

    def __post_init__(self):
        if min(self.nx, self.ny) < 1 or self.nz < 2:
            raise CoreError(
                f"grid needs nx, ny >= 1 and nz >= 2, got "
                f"{self.nx}x{self.ny}x{self.nz}", operation="Grid3D")
        if min(self.length_x, self.length_y, self.depth) <= 0:
            raise CoreError("periods and depth must be positive",
                            operation="Grid3D")

    @property
    def hx(self):
        return self.length_x / self.nx

    @property
    def hy(self):
        return self.length_y / self.ny

    @property
    def hz(self):
        return self.depth / (self.nz - 1)

    @property
    def xs(self):
        return self.x0 + self.hx * np.arange(self.nx)

    @property
    def ys(self):
        return self.y0 + self.hy * np.arange(self.ny)

    @property
    def zs(self):
        return np.linspace(0.0, self.depth, self.nz)

    @property
    def size(self):
        return self.nx * self.ny * self.nz

    def meshgrid(self):
        """(X, Y, Z) arrays of shape (nx, ny, nz)."""
        return np.meshgrid(self.xs, self.ys, self.zs, indexing="ij")


class ScalarField3D:
    """Scalar samples on a Grid3D; values frozen after construction."""

    __slots__ = ("grid", "values", "time")

    def __init__(self, grid: Grid3D, values, time: float = 0.0):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.shape != (grid.nx, grid.ny, grid.nz):
            if values.size == grid.size:
                values = values.reshape((grid.nx, grid.ny, grid.nz),
                                        order="F")
            else:
                raise CoreError(
                    f"value count {values.size} != grid size {grid.size}",
                    operation="ScalarField3D")
        if not np.all(np.isfinite(values)):
            raise CoreError("field contains non-finite values",
                            operation="ScalarField3D")
        if values.flags.writeable:
            values = values.copy()          # never freeze a caller's array
        values.flags.writeable = False
        self.grid = grid
        self.values = values
        self.time = float(time)

    def flat(self):
        """Values flattened in file order (x fastest, then y, then z)."""
        return self.values.reshape(-1, order="F")

    @classmethod
    def from_function(cls, grid, fn, time=0.0):
        X, Y, Z = grid.meshgrid()
        return cls(grid, np.broadcast_to(fn(X, Y, Z),
                                         (grid.nx, grid.ny, grid.nz)),
                   time=time)

    @classmethod
    def constant(cls, grid, value, time=0.0):
        return cls(grid, np.full((grid.nx, grid.ny, grid.nz), float(value)),
                   time=time)


def _locate_xy(grid, x, y):
    """Periodic cell indices and weights for bilinear/trilinear blending."""
    fx = (np.asarray(x, dtype=float) - grid.x0) / grid.hx
    fy = (np.asarray(y, dtype=float) - grid.y0) / grid.hy
    i0 = np.floor(fx).astype(np.int64)
    j0 = np.floor(fy).astype(np.int64)
    wx = fx - i0
    wy = fy - j0
    i0 %= grid.nx
    j0 %= grid.ny
    i1 = (i0 + 1) % grid.nx
    j1 = (j0 + 1) % grid.ny
    return i0, i1, wx, j0, j1, wy


def _locate_z(grid, z, eps):
    z = np.asarray(z, dtype=float)
    if np.any(z < -eps) or np.any(z > grid.depth + eps):
        bad = float(np.min(z)) if np.any(z < -eps) else float(np.max(z))
        raise OutOfDomainError(
            f"z = {bad:.6g} outside [0, {grid.depth:.6g}]",
            operation="trilinear_sample")
    fz = np.clip(z, 0.0, grid.depth) / grid.hz
    k0 = np.minimum(np.floor(fz).astype(np.int64), grid.nz - 2)
    wz = fz - k0
    return k0, k0 + 1, wz


def trilinear_sample(field: ScalarField3D, x, y, z, eps: float = 1e-9):
    """Trilinear blend of the 8 surrounding nodes at (x, y, z).

    x and y wrap periodically; z must lie within [0, depth] up to `eps`.
    Exact on fields linear in each coordinate; at grid nodes returns the
    stored value. Accepts scalars or broadcastable arrays.
    """
    grid = field.grid
    i0, i1, wx, j0, j1, wy = _locate_xy(grid, x, y)
    k0, k1, wz = _locate_z(grid, z, eps)
    v = field.values
    c00 = v[i0, j0, k0] * (1 - wx) + v[i1, j0, k0] * wx
    c10 = v[i0, j1, k0] * (1 - wx) + v[i1, j1, k0] * wx
    c01 = v[i0, j0, k1] * (1 - wx) + v[i1, j0, k1] * wx
    c11 = v[i0, j1, k1] * (1 - wx) + v[i1, j1, k1] * wx
    c0 = c00 * (1 - wy) + c10 * wy
    c1 = c01 * (1 - wy) + c11 * wy
    out = c0 * (1 - wz) + c1 * wz
    if np.ndim(x) == 0 and np.ndim(y) == 0 and np.ndim(z) == 0:
        return float(out)
    return out


def z_trapezoid_weights(grid: Grid3D):
    """Quadrature weights: uniform in periodic x, y; trapezoid in z."""
    wz = np.full(grid.nz, grid.hz)
    wz[0] *= 0.5
    wz[-1] *= 0.5
    return grid.hx * grid.hy * wz


def relative_l2_error(field_a: ScalarField3D, field_b: ScalarField3D):
    """|| A - B ||_L2 / || B ||_L2 with trapezoidal z-weights.

    Both fields must share one grid; a zero-norm reference is rejected.
    """
    if field_a.grid != field_b.grid:
        raise CoreError("fields live on different grids",
                        operation="relative_l2_error")
    w = z_trapezoid_weights(field_a.grid)          # shape (nz,)
    diff2 = (field_a.values - field_b.values) ** 2
    ref2 = field_b.values ** 2
    num = np.sqrt(np.sum(diff2 * w))
    den = np.sqrt(np.sum(ref2 * w))
    if den == 0.0:
        raise DegenerateReferenceError("reference field has zero L2 norm",
                                       operation="relative_l2_error")
    return float(num / den)
