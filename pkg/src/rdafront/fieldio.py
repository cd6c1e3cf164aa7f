"""Field file formats: FLD1, CSV, and legacy structured-points text.

FLD1 is the package's native plain-text format::

    FLD1 nx ny nz x0 L y0 M a t
    <value>
    <value>
    ...

One value per line in file order (x fastest, then y, then z), printed
with 17 significant digits so that write/read round trips reproduce the
double-precision values bit-exactly.

CSV export writes an `x,y,z,value` header plus one row per node in the
same order. The legacy structured-points writer emits the classic ASCII
VTK header understood by common external viewers.
"""

from __future__ import annotations

import numpy as np

from .errors import FieldIOError
from .grid import Grid3D, ScalarField3D

FORMATS = ("fld1", "csv", "vtk")


def write_fld1(field: ScalarField3D, path):
    g = field.grid
    header = (f"FLD1 {g.nx} {g.ny} {g.nz} {g.x0!r} {g.length_x!r} "
              f"{g.y0!r} {g.length_y!r} {g.depth!r} {field.time!r}")
    try:
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for v in field.flat():
                fh.write(f"{v:.17g}\n")
    except OSError as exc:
        raise FieldIOError(f"cannot write '{path}': {exc}",
                           operation="write_fld1") from None


def read_fld1(path) -> ScalarField3D:
    try:
        with open(path) as fh:
            header = fh.readline().split()
            if len(header) != 10 or header[0] != "FLD1":
                raise FieldIOError(f"'{path}' is not an FLD1 file",
                                   operation="read_fld1")
            nx, ny, nz = (int(header[i]) for i in (1, 2, 3))
            x0, L, y0, M, a, t = (float(header[i]) for i in range(4, 10))
            values = np.loadtxt(fh, dtype=np.float64, ndmin=1)
    except OSError as exc:
        raise FieldIOError(f"cannot read '{path}': {exc}",
                           operation="read_fld1") from None
    if nz == 1:
        raise FieldIOError(
            f"'{path}' is an nz = 1 front file; use read_front_fld1",
            operation="read_fld1")
    grid = Grid3D(nx, ny, nz, x0, L, y0, M, a)
    if values.size != grid.size:
        raise FieldIOError(
            f"'{path}' holds {values.size} values, expected {grid.size}",
            operation="read_fld1")
    return ScalarField3D(grid, values, time=t)


def write_csv(field: ScalarField3D, path):
    g = field.grid
    xs, ys, zs = g.xs, g.ys, g.zs
    flat = field.flat()
    try:
        with open(path, "w") as fh:
            fh.write("x,y,z,value\n")
            n = 0
            for k in range(g.nz):
                for j in range(g.ny):
                    for i in range(g.nx):
                        fh.write(f"{xs[i]:.17g},{ys[j]:.17g},"
                                 f"{zs[k]:.17g},{flat[n]:.17g}\n")
                        n += 1
    except OSError as exc:
        raise FieldIOError(f"cannot write '{path}': {exc}",
                           operation="write_csv") from None


def write_structured_points(field: ScalarField3D, path,
                            name: str = "field"):
    """Legacy ASCII structured-points text (VTK DataFile version 2.0)."""
    g = field.grid
    try:
        with open(path, "w") as fh:
            fh.write("# vtk DataFile Version 2.0\n")
            fh.write(f"rdafront export t={field.time:.17g}\n")
            fh.write("ASCII\n")
            fh.write("DATASET STRUCTURED_POINTS\n")
            fh.write(f"DIMENSIONS {g.nx} {g.ny} {g.nz}\n")
            fh.write(f"ORIGIN {g.x0:.17g} {g.y0:.17g} 0.0\n")
            fh.write(f"SPACING {g.hx:.17g} {g.hy:.17g} {g.hz:.17g}\n")
            fh.write(f"POINT_DATA {g.size}\n")
            fh.write(f"SCALARS {name} double 1\n")
            fh.write("LOOKUP_TABLE default\n")
            for v in field.flat():
                fh.write(f"{v:.17g}\n")
    except OSError as exc:
        raise FieldIOError(f"cannot write '{path}': {exc}",
                           operation="write_structured_points") from None


def export_field(field: ScalarField3D, fmt: str, path):
    """Write `field` in one of FORMATS ('fld1', 'csv', 'vtk')."""
    fmt = fmt.lower()
    if fmt == "fld1":
        write_fld1(field, path)
    elif fmt == "csv":
        write_csv(field, path)
    elif fmt == "vtk":
        write_structured_points(field, path)
    else:
        raise FieldIOError(
            f"unknown format '{fmt}' (expected one of {FORMATS})",
            operation="export_field")


def write_front_csv(surface, path):
    """Front snapshot as x,y,h rows (grid order, x fastest)."""
    g = surface.grid
    xs, ys = g.xs, g.ys
    try:
        with open(path, "w") as fh:
            fh.write("x,y,h\n")
            for j in range(g.ny):
                for i in range(g.nx):
                    fh.write(f"{xs[i]:.17g},{ys[j]:.17g},"
                             f"{surface.h[i, j]:.17g}\n")
    except OSError as exc:
        raise FieldIOError(f"cannot write '{path}': {exc}",
                           operation="write_front_csv") from None


def write_front_fld1(surface, path):
    """Front snapshot in FLD1 with nz = 1 (values are surface heights)."""
    g = surface.grid
    header = (f"FLD1 {g.nx} {g.ny} 1 {g.x0!r} {g.length_x!r} "
              f"{g.y0!r} {g.length_y!r} {g.depth!r} {surface.time!r}")
    try:
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for v in surface.h.reshape(-1, order="F"):
                fh.write(f"{v:.17g}\n")
    except OSError as exc:
        raise FieldIOError(f"cannot write '{path}': {exc}",
                           operation="write_front_fld1") from None


def read_front_fld1(path):
    """Read an nz = 1 FLD1 file back into a FrontSurface (h_t zeroed)."""
    from .surface import FrontSurface

    try:
        with open(path) as fh:
            header = fh.readline().split()
            if len(header) != 10 or header[0] != "FLD1" or header[3] != "1":
                raise FieldIOError(
                    f"'{path}' is not an nz = 1 FLD1 front file",
                    operation="read_front_fld1")
            nx, ny = int(header[1]), int(header[2])
            x0, L, y0, M, a, t = (float(header[i]) for i in range(4, 10))
            values = np.loadtxt(fh, dtype=np.float64, ndmin=1)
    except OSError as exc:
        raise FieldIOError(f"cannot read '{path}': {exc}",
                           operation="read_front_fld1") from None
    grid = Grid3D(nx, ny, 2, x0, L, y0, M, a)
    if values.size != nx * ny:
        raise FieldIOError(f"'{path}' holds {values.size} values, "
                           f"expected {nx * ny}", operation="read_front_fld1")
    return FrontSurface(grid, values.reshape((nx, ny), order="F"), time=t)
