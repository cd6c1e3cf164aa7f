"""Generated numba kernels for the production-size grids.

The portable numpy engines in `characteristics`, `outer`, `front` and
`refsolve` define the semantics; these kernels implement the same
algorithms with the problem's coefficient expressions inlined into
generated source (compiled once per problem and memoized on the
expression text). No fastmath, fixed evaluation order: results are
bit-reproducible across runs and thread counts.

Grid solves march z-slice by z-slice away from the launch face; the
converged (s1, s2, tau) of the previous slice, advanced by one
first-order characteristic prediction, seeds the next slice's Newton
iteration (the previous slice plays the role of the traced fan). Every
node is still polished by the full three-unknown Newton iteration on
the RK4 flow map to residual 1e-8, so accuracy stays step-controlled.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

from . import expr as ex

NEWTON_TOL = 1e-8
NEWTON_MAX_ITERS = 25

_CACHE = {}


def _compile(src, names, extra=None):
    ns = {"math": math, "njit": njit, "prange": prange, "np": np}
    if extra:
        ns.update(extra)
    exec(compile(src, f"<rdafront-kernel:{names}>", "exec"), ns)
    return tuple(ns[n] for n in names.split(","))


def _memo(key, builder):
    if key not in _CACHE:
        _CACHE[key] = builder()
    return _CACHE[key]


# ---------------------------------------------------------------------------
# static helpers (plain numba, shared by all generated kernels)

@njit(cache=True, inline="always")
def _wrapd(d, period):
    return d - period * round(d / period)


@njit(cache=True, inline="always")
def _wrap_in(v, origin, period):
    w = (v - origin) % period
    return origin + w


@njit(cache=True, inline="always")
def _trilerp(vals, x, y, z, x0, hx, y0, hy, hz):
    """Periodic in x, y; z clamped to the slab. vals: (nx, ny, nz)."""
    nx, ny, nz = vals.shape
    fx = (x - x0) / hx
    fy = (y - y0) / hy
    i0 = int(math.floor(fx))
    j0 = int(math.floor(fy))
    wx = fx - i0
    wy = fy - j0
    i0 = i0 % nx
    j0 = j0 % ny
    i1 = (i0 + 1) % nx
    j1 = (j0 + 1) % ny
    fz = z / hz
    if fz < 0.0:
        fz = 0.0
    k0 = int(math.floor(fz))
    if k0 > nz - 2:
        k0 = nz - 2
    wz = fz - k0
    k1 = k0 + 1
    c00 = vals[i0, j0, k0] * (1 - wx) + vals[i1, j0, k0] * wx
    c10 = vals[i0, j1, k0] * (1 - wx) + vals[i1, j1, k0] * wx
    c01 = vals[i0, j0, k1] * (1 - wx) + vals[i1, j0, k1] * wx
    c11 = vals[i0, j1, k1] * (1 - wx) + vals[i1, j1, k1] * wx
    return ((c00 * (1 - wy) + c10 * wy) * (1 - wz)
            + (c01 * (1 - wy) + c11 * wy) * wz)


@njit(cache=True, inline="always")
def _bilerp(vals, x, y, x0, hx, y0, hy):
    """Periodic bilinear sample of a (nx, ny) surface array."""
    nx, ny = vals.shape
    fx = (x - x0) / hx
    fy = (y - y0) / hy
    i0 = int(math.floor(fx))
    j0 = int(math.floor(fy))
    wx = fx - i0
    wy = fy - j0
    i0 = i0 % nx
    j0 = j0 % ny
    i1 = (i0 + 1) % nx
    j1 = (j0 + 1) % ny
    return ((vals[i0, j0] * (1 - wx) + vals[i1, j0] * wx) * (1 - wy)
            + (vals[i0, j1] * (1 - wx) + vals[i1, j1] * wx) * wy)


_HELPERS = {"_wrapd": _wrapd, "_wrap_in": _wrap_in, "_trilerp": _trilerp,
            "_bilerp": _bilerp}


def _defs(spec):
    """Generated scalar coefficient functions for one problem."""
    a_src = ex.py_source(spec.A)
    b_src = ex.py_source(spec.B)
    f_src = ex.py_source(spec.F)
    u0_src = ex.py_source(spec.u0)
    ua_src = ex.py_source(spec.ua)
    hi_src = ex.py_source(spec.h_init)
    src = f"""
sin = math.sin; cos = math.cos; tan = math.tan; tanh = math.tanh
exp = math.exp; log = math.log; sqrt = math.sqrt

@njit(cache=False, inline="always")
def _A(x, y, z):
    return {a_src}

@njit(cache=False, inline="always")
def _B(x, y, z):
    return {b_src}

@njit(cache=False, inline="always")
def _F(x, y, z, u):
    return {f_src}

@njit(cache=False, inline="always")
def _U0(x, y):
    return {u0_src}

@njit(cache=False, inline="always")
def _UA(x, y):
    return {ua_src}

@njit(cache=False, inline="always")
def _HINIT(x, y):
    return {hi_src}
"""
    return _compile(src, "_A,_B,_F,_U0,_UA,_HINIT")


def _spec_key(spec):
    return tuple(ex.py_source(getattr(spec, n))
                 for n in ("A", "B", "F", "u0", "ua", "h_init"))


def problem_functions(spec):
    return _memo(("defs", _spec_key(spec)), lambda: _defs(spec))


# ---------------------------------------------------------------------------
# degenerate-equation slice solver

_DEG_SRC = """
@njit(cache=False, inline="always")
def _dg_rhs(x, y, z, u, x0, Lx, y0, Ly):
    # coefficients are defined on the periodic cell: wrap before evaluating
    xw = _wrap_in(x, x0, Lx)
    yw = _wrap_in(y, y0, Ly)
    return _A(xw, yw, z), _B(xw, yw, z), -u, -_F(xw, yw, z, u)


@njit(cache=False)
def _dg_flow(s1, s2, tau, step, zface, minus, x0, Lx, y0, Ly):
    x = _wrap_in(s1, x0, Lx)
    y = _wrap_in(s2, y0, Ly)
    z = zface
    if minus:
        u = _U0(x, y)
    else:
        u = _UA(x, y)
    n = int(math.ceil(abs(tau) / step))
    if n < 1:
        n = 1
    dt = tau / n
    for _ in range(n):
        k1x, k1y, k1z, k1u = _dg_rhs(x, y, z, u, x0, Lx, y0, Ly)
        x2 = x + 0.5 * dt * k1x; y2 = y + 0.5 * dt * k1y
        z2 = z + 0.5 * dt * k1z; u2 = u + 0.5 * dt * k1u
        k2x, k2y, k2z, k2u = _dg_rhs(x2, y2, z2, u2, x0, Lx, y0, Ly)
        x3 = x + 0.5 * dt * k2x; y3 = y + 0.5 * dt * k2y
        z3 = z + 0.5 * dt * k2z; u3 = u + 0.5 * dt * k2u
        k3x, k3y, k3z, k3u = _dg_rhs(x3, y3, z3, u3, x0, Lx, y0, Ly)
        x4 = x + dt * k3x; y4 = y + dt * k3y
        z4 = z + dt * k3z; u4 = u + dt * k3u
        k4x, k4y, k4z, k4u = _dg_rhs(x4, y4, z4, u4, x0, Lx, y0, Ly)
        c = dt / 6.0
        x += c * (k1x + 2 * k2x + 2 * k3x + k4x)
        y += c * (k1y + 2 * k2y + 2 * k3y + k4y)
        z += c * (k1z + 2 * k2z + 2 * k3z + k4z)
        u += c * (k1u + 2 * k2u + 2 * k3u + k4u)
    return x, y, z, u


@njit(cache=False, parallel=True)
def _dg_slice(xs, ys, zk, step, zface, minus, x0, Lx, y0, Ly,
              s1a, s2a, taua, out_u, out_res, out_it, out_conv):
    nx = xs.size
    ny = ys.size
    for idx in prange(nx * ny):
        i = idx // ny
        j = idx % ny
        xt = xs[i]
        yt = ys[j]
        s1 = s1a[i, j]
        s2 = s2a[i, j]
        tau = taua[i, j]
        x, y, z, u = _dg_flow(s1, s2, tau, step, zface, minus, x0, Lx, y0, Ly)
        rx = _wrapd(x - xt, Lx); ry = _wrapd(y - yt, Ly); rz = z - zk
        rn = math.sqrt(rx * rx + ry * ry + rz * rz)
        it = 0
        while rn > 1e-8 and it < 25:
            d1 = 1e-6 * Lx
            d2 = 1e-6 * Ly
            d3 = 1e-6 * (abs(tau) if abs(tau) > 1e-3 else 1e-3)
            xa, ya, za, ua = _dg_flow(s1 + d1, s2, tau, step, zface, minus, x0, Lx, y0, Ly)
            xb, yb, zb, ub = _dg_flow(s1, s2 + d2, tau, step, zface, minus, x0, Lx, y0, Ly)
            xc, yc, zc, uc = _dg_flow(s1, s2, tau + d3, step, zface, minus, x0, Lx, y0, Ly)
            j11 = _wrapd(xa - x, Lx) / d1; j12 = _wrapd(xb - x, Lx) / d2
            j13 = _wrapd(xc - x, Lx) / d3
            j21 = _wrapd(ya - y, Ly) / d1; j22 = _wrapd(yb - y, Ly) / d2
            j23 = _wrapd(yc - y, Ly) / d3
            j31 = (za - z) / d1; j32 = (zb - z) / d2; j33 = (zc - z) / d3
            det = (j11 * (j22 * j33 - j23 * j32)
                   - j12 * (j21 * j33 - j23 * j31)
                   + j13 * (j21 * j32 - j22 * j31))
            if abs(det) < 1e-14:
                break
            u1 = ((rx * (j22 * j33 - j23 * j32)
                   - j12 * (ry * j33 - j23 * rz)
                   + j13 * (ry * j32 - j22 * rz)) / det)
            u2 = ((j11 * (ry * j33 - j23 * rz)
                   - rx * (j21 * j33 - j23 * j31)
                   + j13 * (j21 * rz - ry * j31)) / det)
            u3 = ((j11 * (j22 * rz - ry * j32)
                   - j12 * (j21 * rz - ry * j31)
                   + rx * (j21 * j32 - j22 * j31)) / det)
            s1 = _wrap_in(s1 - u1, x0, Lx)
            s2 = _wrap_in(s2 - u2, y0, Ly)
            tau = tau - u3
            x, y, z, u = _dg_flow(s1, s2, tau, step, zface, minus, x0, Lx, y0, Ly)
            rx = _wrapd(x - xt, Lx); ry = _wrapd(y - yt, Ly); rz = z - zk
            rn = math.sqrt(rx * rx + ry * ry + rz * rz)
            it += 1
        s1a[i, j] = s1
        s2a[i, j] = s2
        taua[i, j] = tau
        out_u[i, j] = u
        out_res[i, j] = rn
        out_it[i, j] = it
        out_conv[i, j] = rn <= 1e-8
"""


def degenerate_kernels(spec):
    """(flow, slice_newton) kernels for one problem's reduced equation."""
    def build():
        fns = problem_functions(spec)
        extra = dict(_HELPERS)
        extra.update(zip(("_A", "_B", "_F", "_U0", "_UA", "_HINIT"), fns))
        return _compile(_DEG_SRC, "_dg_flow,_dg_slice", extra)
    return _memo(("degenerate", _spec_key(spec)), build)


def solve_degenerate_grid(spec, branch, grid, step):
    """Slice-marching grid solve; same contract as the numpy engine.

    Returns (values, s1, s2, tau, residual, iterations, converged), each
    of shape (nx, ny, nz).
    """
    flow, slice_newton = degenerate_kernels(spec)
    minus = branch == "minus"
    zface = 0.0 if minus else grid.depth
    xs, ys, zs = grid.xs, grid.ys, grid.zs
    nx, ny, nz = grid.nx, grid.ny, grid.nz
    shape = (nx, ny, nz)
    vals = np.empty(shape)
    s1 = np.empty(shape)
    s2 = np.empty(shape)
    tau = np.empty(shape)
    res = np.empty(shape)
    iters = np.empty(shape, dtype=np.int64)
    conv = np.empty(shape, dtype=np.bool_)

    X, Y = np.meshgrid(xs, ys, indexing="ij")
    order = range(nz) if minus else range(nz - 1, -1, -1)
    order = list(order)
    k_face = order[0]

    # launch face: the manifold itself
    bvals = spec.u0 if minus else spec.ua
    uface = np.broadcast_to(bvals.eval({"x": X, "y": Y}), X.shape)
    vals[:, :, k_face] = uface
    s1[:, :, k_face] = X
    s2[:, :, k_face] = Y
    tau[:, :, k_face] = 0.0
    res[:, :, k_face] = 0.0
    iters[:, :, k_face] = 0
    conv[:, :, k_face] = True

    hz = grid.hz
    for prev, k in zip(order[:-1], order[1:]):
        up = vals[:, :, prev]
        zp = zs[prev]
        # one-step characteristic prediction from the previous slice
        dtau = hz / np.abs(up)
        Ap = np.broadcast_to(spec.A.eval({"x": X, "y": Y, "z": zp}), X.shape)
        Bp = np.broadcast_to(spec.B.eval({"x": X, "y": Y, "z": zp}), X.shape)
        g1 = np.ascontiguousarray(s1[:, :, prev] - Ap * dtau)
        g2 = np.ascontiguousarray(s2[:, :, prev] - Bp * dtau)
        gt = np.ascontiguousarray(tau[:, :, prev] + dtau)
        ou = np.empty((nx, ny))
        orr = np.empty((nx, ny))
        oit = np.empty((nx, ny), dtype=np.int64)
        oc = np.empty((nx, ny), dtype=np.bool_)
        slice_newton(xs, ys, zs[k], step, zface, minus,
                     grid.x0, grid.length_x, grid.y0, grid.length_y,
                     g1, g2, gt, ou, orr, oit, oc)
        vals[:, :, k] = ou
        s1[:, :, k] = g1
        s2[:, :, k] = g2
        tau[:, :, k] = gt
        res[:, :, k] = orr
        iters[:, :, k] = oit
        conv[:, :, k] = oc
    return vals, s1, s2, tau, res, iters, conv


# ---------------------------------------------------------------------------
# first-order outer correction: descent quadrature along characteristics

_U1_SRC = """
@njit(cache=False, parallel=True)
def _u1_sweep(phi, w_over_phi_grid, f_over_phi_grid, xs, ys, zs,
              x0, hx, y0, hy, hz, minus, msub, out):
    nx = xs.size
    ny = ys.size
    nz = zs.size
    for idx in prange(nx * ny):
        i = idx // ny
        j = idx % ny
        if minus:
            kface = 0
            kdir = -1
        else:
            kface = nz - 1
            kdir = 1
        for k in range(nz):
            kk = k if minus else nz - 1 - k
            if kk == kface:
                out[i, j, kk] = 0.0
                continue
            x = xs[i]
            y = ys[j]
            z = zs[kk]
            S = 0.0
            I = 0.0
            wprev = _trilerp(w_over_phi_grid, x, y, z, x0, hx, y0, hy, hz)
            gprev = _trilerp(f_over_phi_grid, x, y, z, x0, hx, y0, hy, hz)
            lev = kk
            while lev != kface:
                nxt = lev + kdir
                zt = zs[nxt]
                dz = (zt - zs[lev]) / msub
                for _ in range(msub):
                    ph = _trilerp(phi, x, y, z, x0, hx, y0, hy, hz)
                    xw = _wrap_in(x, x0, hx * phi.shape[0])
                    yw = _wrap_in(y, y0, hy * phi.shape[1])
                    k1x = -_A(xw, yw, z) / ph
                    k1y = -_B(xw, yw, z) / ph
                    xm = x + 0.5 * dz * k1x
                    ym = y + 0.5 * dz * k1y
                    zm = z + 0.5 * dz
                    phm = _trilerp(phi, xm, ym, zm, x0, hx, y0, hy, hz)
                    xw = _wrap_in(xm, x0, hx * phi.shape[0])
                    yw = _wrap_in(ym, y0, hy * phi.shape[1])
                    k2x = -_A(xw, yw, zm) / phm
                    k2y = -_B(xw, yw, zm) / phm
                    xm2 = x + 0.5 * dz * k2x
                    ym2 = y + 0.5 * dz * k2y
                    phm2 = _trilerp(phi, xm2, ym2, zm, x0, hx, y0, hy, hz)
                    xw = _wrap_in(xm2, x0, hx * phi.shape[0])
                    yw = _wrap_in(ym2, y0, hy * phi.shape[1])
                    k3x = -_A(xw, yw, zm) / phm2
                    k3y = -_B(xw, yw, zm) / phm2
                    xe = x + dz * k3x
                    ye = y + dz * k3y
                    ze = z + dz
                    phe = _trilerp(phi, xe, ye, ze, x0, hx, y0, hy, hz)
                    xw = _wrap_in(xe, x0, hx * phi.shape[0])
                    yw = _wrap_in(ye, y0, hy * phi.shape[1])
                    k4x = -_A(xw, yw, ze) / phe
                    k4y = -_B(xw, yw, ze) / phe
                    x += dz / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
                    y += dz / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
                    z = ze
                wcur = _trilerp(w_over_phi_grid, x, y, z, x0, hx, y0, hy, hz)
                # S = oriented integral from the current level back to the node
                S += 0.5 * (wprev + wcur) * (zs[lev] - zt)
                gcur = (_trilerp(f_over_phi_grid, x, y, z, x0, hx, y0, hy, hz)
                        * math.exp(S))
                I += 0.5 * (gprev + gcur) * abs(zt - zs[lev])
                wprev = wcur
                gprev = gcur
                lev = nxt
            if minus:
                out[i, j, kk] = -I
            else:
                out[i, j, kk] = I
"""


def u1_kernel(spec):
    def build():
        fns = problem_functions(spec)
        extra = dict(_HELPERS)
        extra.update(zip(("_A", "_B", "_F", "_U0", "_UA", "_HINIT"), fns))
        return _compile(_U1_SRC, "_u1_sweep", extra)[0]
    return _memo(("u1", _spec_key(spec)), build)


# ---------------------------------------------------------------------------
# front-surface characteristics (2D, time is the parameter)

_FRONT_SRC = """
@njit(cache=False, inline="always")
def _fr_rhs(x, y, h, phiM, phiP, x0, hx, y0, hy, hz):
    nx = phiM.shape[0]
    ny = phiM.shape[1]
    xw = _wrap_in(x, x0, hx * nx)
    yw = _wrap_in(y, y0, hy * ny)
    kx = _A(xw, yw, h)
    ky = _B(xw, yw, h)
    kh = -0.5 * (_trilerp(phiM, x, y, h, x0, hx, y0, hy, hz)
                 + _trilerp(phiP, x, y, h, x0, hx, y0, hy, hz))
    return kx, ky, kh


@njit(cache=False)
def _fr_flow(s1, s2, t_end, dt, phiM, phiP, x0, hx, y0, hy, hz, depth):
    x = _wrap_in(s1, x0, hx * phiM.shape[0])
    y = _wrap_in(s2, y0, hy * phiM.shape[1])
    h = _HINIT(x, y)
    if t_end <= 0.0:
        return x, y, h
    n = int(math.ceil(t_end / dt))
    ddt = t_end / n
    for _ in range(n):
        k1x, k1y, k1h = _fr_rhs(x, y, h, phiM, phiP, x0, hx, y0, hy, hz)
        x2 = x + 0.5 * ddt * k1x; y2 = y + 0.5 * ddt * k1y
        h2 = h + 0.5 * ddt * k1h
        k2x, k2y, k2h = _fr_rhs(x2, y2, h2, phiM, phiP, x0, hx, y0, hy, hz)
        x3 = x + 0.5 * ddt * k2x; y3 = y + 0.5 * ddt * k2y
        h3 = h + 0.5 * ddt * k2h
        k3x, k3y, k3h = _fr_rhs(x3, y3, h3, phiM, phiP, x0, hx, y0, hy, hz)
        x4 = x + ddt * k3x; y4 = y + ddt * k3y
        h4 = h + ddt * k3h
        k4x, k4y, k4h = _fr_rhs(x4, y4, h4, phiM, phiP, x0, hx, y0, hy, hz)
        c = ddt / 6.0
        x += c * (k1x + 2 * k2x + 2 * k3x + k4x)
        y += c * (k1y + 2 * k2y + 2 * k3y + k4y)
        h += c * (k1h + 2 * k2h + 2 * k3h + k4h)
    return x, y, h


@njit(cache=False, parallel=True)
def _fr_fan(seeds1, seeds2, t_end, dt, phiM, phiP, x0, hx, y0, hy, hz,
            depth, esc_t):
    n = seeds1.size
    for idx in prange(n):
        x = seeds1[idx]
        y = seeds2[idx]
        h = _HINIT(_wrap_in(x, x0, hx * phiM.shape[0]),
                   _wrap_in(y, y0, hy * phiM.shape[1]))
        esc = -1.0
        if t_end > 0.0:
            nst = int(math.ceil(t_end / dt))
            ddt = t_end / nst
            t = 0.0
            for _ in range(nst):
                k1x, k1y, k1h = _fr_rhs(x, y, h, phiM, phiP,
                                        x0, hx, y0, hy, hz)
                x2 = x + 0.5 * ddt * k1x; y2 = y + 0.5 * ddt * k1y
                h2 = h + 0.5 * ddt * k1h
                k2x, k2y, k2h = _fr_rhs(x2, y2, h2, phiM, phiP,
                                        x0, hx, y0, hy, hz)
                x3 = x + 0.5 * ddt * k2x; y3 = y + 0.5 * ddt * k2y
                h3 = h + 0.5 * ddt * k2h
                k3x, k3y, k3h = _fr_rhs(x3, y3, h3, phiM, phiP,
                                        x0, hx, y0, hy, hz)
                x4 = x + ddt * k3x; y4 = y + ddt * k3y
                h4 = h + ddt * k3h
                k4x, k4y, k4h = _fr_rhs(x4, y4, h4, phiM, phiP,
                                        x0, hx, y0, hy, hz)
                c = ddt / 6.0
                x += c * (k1x + 2 * k2x + 2 * k3x + k4x)
                y += c * (k1y + 2 * k2y + 2 * k3y + k4y)
                h += c * (k1h + 2 * k2h + 2 * k3h + k4h)
                t += ddt
                if esc < 0.0 and (h < -1e-9 or h > depth + 1e-9):
                    esc = t
        esc_t[idx] = esc


@njit(cache=False, parallel=True)
def _fr_newton(xs, ys, t_out, dt, phiM, phiP, x0, hx, y0, hy, hz, depth,
               Lx, Ly, ox0, oy0, s1a, s2a, out_h, out_res, out_conv):
    nx = xs.size
    ny = ys.size
    for idx in prange(nx * ny):
        i = idx // ny
        j = idx % ny
        xt = xs[i]
        yt = ys[j]
        s1 = s1a[i, j]
        s2 = s2a[i, j]
        x, y, h = _fr_flow(s1, s2, t_out, dt, phiM, phiP,
                           x0, hx, y0, hy, hz, depth)
        rx = _wrapd(x - xt, Lx); ry = _wrapd(y - yt, Ly)
        rn = math.sqrt(rx * rx + ry * ry)
        it = 0
        while rn > 1e-8 and it < 25:
            d1 = 1e-6 * Lx
            d2 = 1e-6 * Ly
            xa, ya, ha = _fr_flow(s1 + d1, s2, t_out, dt, phiM, phiP,
                                  x0, hx, y0, hy, hz, depth)
            xb, yb, hb = _fr_flow(s1, s2 + d2, t_out, dt, phiM, phiP,
                                  x0, hx, y0, hy, hz, depth)
            j11 = _wrapd(xa - x, Lx) / d1; j12 = _wrapd(xb - x, Lx) / d2
            j21 = _wrapd(ya - y, Ly) / d1; j22 = _wrapd(yb - y, Ly) / d2
            det = j11 * j22 - j12 * j21
            if abs(det) < 1e-14:
                break
            s1 = _wrap_in(s1 - (rx * j22 - j12 * ry) / det, ox0, Lx)
            s2 = _wrap_in(s2 - (j11 * ry - rx * j21) / det, oy0, Ly)
            x, y, h = _fr_flow(s1, s2, t_out, dt, phiM, phiP,
                               x0, hx, y0, hy, hz, depth)
            rx = _wrapd(x - xt, Lx); ry = _wrapd(y - yt, Ly)
            rn = math.sqrt(rx * rx + ry * ry)
            it += 1
        s1a[i, j] = s1
        s2a[i, j] = s2
        out_h[i, j] = h
        out_res[i, j] = rn
        out_conv[i, j] = rn <= 1e-8
"""


def front_kernels(spec):
    def build():
        fns = problem_functions(spec)
        extra = dict(_HELPERS)
        extra.update(zip(("_A", "_B", "_F", "_U0", "_UA", "_HINIT"), fns))
        return _compile(_FRONT_SRC, "_fr_flow,_fr_fan,_fr_newton", extra)
    return _memo(("front", _spec_key(spec)), build)


# ---------------------------------------------------------------------------
# first-order front correction: linear transport along gridded coefficients

_H1_SRC = """
@njit(cache=False)
def _h1_flow(s1, s2, t_end, dt, cx, cy, ch, hsrc, az, x0, hx, y0, hy, ht):
    # state (x, y, v); coefficient stacks sampled periodically in x, y
    # and linearly in t (last axis)
    x = s1
    y = s2
    v = 0.0
    if t_end <= 0.0:
        return x, y, v
    n = int(math.ceil(t_end / dt))
    ddt = t_end / n
    t = 0.0
    for _ in range(n):
        k1x = _trilerp(cx, x, y, t, x0, hx, y0, hy, ht)
        k1y = _trilerp(cy, x, y, t, x0, hx, y0, hy, ht)
        k1v = -(_trilerp(ch, x, y, t, x0, hx, y0, hy, ht) * v
                + _trilerp(hsrc, x, y, t, x0, hx, y0, hy, ht)) \\
            / _trilerp(az, x, y, t, x0, hx, y0, hy, ht)
        xm = x + 0.5 * ddt * k1x; ym = y + 0.5 * ddt * k1y
        vm = v + 0.5 * ddt * k1v; tm = t + 0.5 * ddt
        k2x = _trilerp(cx, xm, ym, tm, x0, hx, y0, hy, ht)
        k2y = _trilerp(cy, xm, ym, tm, x0, hx, y0, hy, ht)
        k2v = -(_trilerp(ch, xm, ym, tm, x0, hx, y0, hy, ht) * vm
                + _trilerp(hsrc, xm, ym, tm, x0, hx, y0, hy, ht)) \\
            / _trilerp(az, xm, ym, tm, x0, hx, y0, hy, ht)
        xm2 = x + 0.5 * ddt * k2x; ym2 = y + 0.5 * ddt * k2y
        vm2 = v + 0.5 * ddt * k2v
        k3x = _trilerp(cx, xm2, ym2, tm, x0, hx, y0, hy, ht)
        k3y = _trilerp(cy, xm2, ym2, tm, x0, hx, y0, hy, ht)
        k3v = -(_trilerp(ch, xm2, ym2, tm, x0, hx, y0, hy, ht) * vm2
                + _trilerp(hsrc, xm2, ym2, tm, x0, hx, y0, hy, ht)) \\
            / _trilerp(az, xm2, ym2, tm, x0, hx, y0, hy, ht)
        xe = x + ddt * k3x; ye = y + ddt * k3y
        ve = v + ddt * k3v; te = t + ddt
        k4x = _trilerp(cx, xe, ye, te, x0, hx, y0, hy, ht)
        k4y = _trilerp(cy, xe, ye, te, x0, hx, y0, hy, ht)
        k4v = -(_trilerp(ch, xe, ye, te, x0, hx, y0, hy, ht) * ve
                + _trilerp(hsrc, xe, ye, te, x0, hx, y0, hy, ht)) \\
            / _trilerp(az, xe, ye, te, x0, hx, y0, hy, ht)
        c = ddt / 6.0
        x += c * (k1x + 2 * k2x + 2 * k3x + k4x)
        y += c * (k1y + 2 * k2y + 2 * k3y + k4y)
        v += c * (k1v + 2 * k2v + 2 * k3v + k4v)
        t += ddt
    return x, y, v


@njit(cache=False, parallel=True)
def _h1_newton(xs, ys, t_out, dt, cx, cy, ch, hsrc, az, x0, hx, y0, hy, ht,
               Lx, Ly, ox0, oy0, s1a, s2a, out_v, out_res, out_conv):
    nx = xs.size
    ny = ys.size
    for idx in prange(nx * ny):
        i = idx // ny
        j = idx % ny
        xt = xs[i]
        yt = ys[j]
        s1 = s1a[i, j]
        s2 = s2a[i, j]
        x, y, v = _h1_flow(s1, s2, t_out, dt, cx, cy, ch, hsrc, az,
                           x0, hx, y0, hy, ht)
        rx = _wrapd(x - xt, Lx); ry = _wrapd(y - yt, Ly)
        rn = math.sqrt(rx * rx + ry * ry)
        it = 0
        while rn > 1e-8 and it < 25:
            d1 = 1e-6 * Lx
            d2 = 1e-6 * Ly
            xa, ya, va = _h1_flow(s1 + d1, s2, t_out, dt, cx, cy, ch, hsrc,
                                  az, x0, hx, y0, hy, ht)
            xb, yb, vb = _h1_flow(s1, s2 + d2, t_out, dt, cx, cy, ch, hsrc,
                                  az, x0, hx, y0, hy, ht)
            j11 = _wrapd(xa - x, Lx) / d1; j12 = _wrapd(xb - x, Lx) / d2
            j21 = _wrapd(ya - y, Ly) / d1; j22 = _wrapd(yb - y, Ly) / d2
            det = j11 * j22 - j12 * j21
            if abs(det) < 1e-14:
                break
            s1 = _wrap_in(s1 - (rx * j22 - j12 * ry) / det, ox0, Lx)
            s2 = _wrap_in(s2 - (j11 * ry - rx * j21) / det, oy0, Ly)
            x, y, v = _h1_flow(s1, s2, t_out, dt, cx, cy, ch, hsrc, az,
                               x0, hx, y0, hy, ht)
            rx = _wrapd(x - xt, Lx); ry = _wrapd(y - yt, Ly)
            rn = math.sqrt(rx * rx + ry * ry)
            it += 1
        s1a[i, j] = s1
        s2a[i, j] = s2
        out_v[i, j] = v
        out_res[i, j] = rn
        out_conv[i, j] = rn <= 1e-8
"""


def h1_kernels():
    # coefficient stacks are gridded, so this kernel is problem-independent
    def build():
        return _compile(_H1_SRC, "_h1_flow,_h1_newton", dict(_HELPERS))
    return _memo(("h1",), build)


# ---------------------------------------------------------------------------
# reference solver: one rate evaluation of the semi-discrete operator

_REF_SRC = """
@njit(cache=False, parallel=True)
def _ref_rate(u, Ag, Bg, Fg, gg, has_g, mu, hx, hy, hz, xs, ys, zs,
              f_from_grid, out):
    nx, ny, nz = u.shape
    ihx2 = 1.0 / (hx * hx)
    ihy2 = 1.0 / (hy * hy)
    ihz2 = 1.0 / (hz * hz)
    ihx = 1.0 / hx
    ihy = 1.0 / hy
    ihz = 1.0 / hz
    for idx in prange(nx * ny):
        i = idx // ny
        j = idx % ny
        ip = i + 1 if i + 1 < nx else 0
        im = i - 1 if i > 0 else nx - 1
        jp = j + 1 if j + 1 < ny else 0
        jm = j - 1 if j > 0 else ny - 1
        out[i, j, 0] = 0.0
        out[i, j, nz - 1] = 0.0
        for k in range(1, nz - 1):
            uc = u[i, j, k]
            lap = ((u[ip, j, k] - 2.0 * uc + u[im, j, k]) * ihx2
                   + (u[i, jp, k] - 2.0 * uc + u[i, jm, k]) * ihy2
                   + (u[i, j, k + 1] - 2.0 * uc + u[i, j, k - 1]) * ihz2)
            av = Ag[i, j, k]
            if av > 0.0:
                ux = (uc - u[im, j, k]) * ihx
            else:
                ux = (u[ip, j, k] - uc) * ihx
            bv = Bg[i, j, k]
            if bv > 0.0:
                uy = (uc - u[i, jm, k]) * ihy
            else:
                uy = (u[i, jp, k] - uc) * ihy
            # u u_z in conservation form with flux g(u) = -u^2/2 (wave
            # speed -u); Rusanov dissipation scaled by the local speed
            # keeps the discrete front moving at the exact jump speed
            up1 = u[i, j, k + 1]
            um1 = u[i, j, k - 1]
            a_hi = abs(uc) if abs(uc) > abs(up1) else abs(up1)
            a_lo = abs(uc) if abs(uc) > abs(um1) else abs(um1)
            f_hi = -0.25 * (uc * uc + up1 * up1) - 0.5 * a_hi * (up1 - uc)
            f_lo = -0.25 * (um1 * um1 + uc * uc) - 0.5 * a_lo * (uc - um1)
            zterm = -(f_hi - f_lo) * ihz
            if f_from_grid:
                fv = Fg[i, j, k]
            else:
                fv = _F(xs[i], ys[j], zs[k], uc)
            rate = mu * lap - av * ux - bv * uy + zterm - fv
            if has_g:
                rate += gg[i, j, k]
            out[i, j, k] = rate
"""


def reference_rate_kernel(spec):
    def build():
        fns = problem_functions(spec)
        extra = dict(_HELPERS)
        extra.update(zip(("_A", "_B", "_F", "_U0", "_UA", "_HINIT"), fns))
        return _compile(_REF_SRC, "_ref_rate", extra)[0]
    return _memo(("ref", _spec_key(spec)), build)
