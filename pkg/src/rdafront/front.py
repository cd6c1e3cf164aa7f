"""Front-surface dynamics: leading position h0, matching functions
H0/H1, and the first-order correction h1.

The leading surface solves the transport problem

    h_t + A(x,y,h) h_x + B(x,y,h) h_y = -(phi- + phi+)/2 |_(x,y,h)

with periodic lateral conditions, by characteristics in (t, x, y)
(dt/ds = 1, so time itself is the parameter); snapshots are re-gridded
by the same fan + Newton inversion used for the 3D grid solves, here
with two unknowns. The stored h_t comes from the transport equation
itself (exact along characteristics) rather than from differencing
snapshots.

H0 is the jump of the layer slope at xi = 0; its closed form
alpha_z (phi- - phi+) (V + (phi- + phi+)/2) vanishes exactly when the
transport equation above holds. H1 collects the first-order jump
(layer-slope difference of Q1 plus the one-sided normal derivatives of
the outer branches), and h1 solves the linear transport equation

    alpha_z h1_t + dH0/dh_x h1_x + dH0/dh_y h1_y + dH0/dh h1 + H1 = 0

with zero initial data, again along characteristics, with coefficient
fields tabulated on the evolution's snapshot stack.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from . import expr as ex
from .characteristics import Manifold, QuasiLinearProblem
from .errors import FrontEscapeError, FrontError, MultivaluedFrontError
from .grid import ScalarField3D, trilinear_sample
from .layer import (
    LayerParams,
    Q1Context,
    normal_angles,
    phase_trajectory,
    q0_profile,
    q0_xi_derivative,
    q1_xi_slope_at_zero,
)
from .surface import FrontSurface, periodic_gradient

DEFAULT_FRONT_DT = 0.0025


# ---------------------------------------------------------------------------
# matching function H0

def eval_H0(V, phi_minus, phi_plus, alpha_z):
    """Layer-slope jump at xi = 0 via the two phase trajectories."""
    params = LayerParams(V=V, phi_minus=phi_minus, phi_plus=phi_plus,
                         alpha_z=alpha_z)
    star = params.phi_star
    out = (phase_trajectory(star, "minus", params)
           - phase_trajectory(star, "plus", params))
    return float(out) if np.ndim(out) == 0 else out


def eval_H0_closed(V, phi_minus, phi_plus, alpha_z):
    """Algebraically identical closed form of eval_H0."""
    out = np.asarray(alpha_z) * (np.asarray(phi_minus) - np.asarray(phi_plus)) \
        * (np.asarray(V) + 0.5 * (np.asarray(phi_minus)
                                  + np.asarray(phi_plus)))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# evolution container

@dataclass
class FrontEvolution:
    """Ordered front snapshots; optionally a signed correction series."""

    times: np.ndarray
    snapshots: list
    correction: bool = False

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.snapshots) != self.times.size:
            raise FrontError("snapshot/time count mismatch",
                             operation="FrontEvolution")

    @property
    def grid(self):
        return self.snapshots[0].grid

    def at_time(self, t: float) -> FrontSurface:
        """Snapshot interpolated linearly in time (h and h_t)."""
        ts = self.times
        t = float(t)
        if t <= ts[0]:
            return self.snapshots[0]
        if t >= ts[-1]:
            return self.snapshots[-1]
        k = int(np.searchsorted(ts, t) - 1)
        w = (t - ts[k]) / (ts[k + 1] - ts[k])
        a, b = self.snapshots[k], self.snapshots[k + 1]
        return FrontSurface(a.grid, (1 - w) * a.h + w * b.h,
                            h_t=(1 - w) * a.h_t + w * b.h_t, time=t,
                            bounded=not self.correction)


def front_problem(spec) -> QuasiLinearProblem:
    """(t, x, y)-space characteristic representation of the h0 problem,
    used for the transversality check (J = 1 on the t = 0 manifold)."""
    a2 = ex.rename_variables(spec.A, {"x": "y", "y": "z", "z": "u"})
    a3 = ex.rename_variables(spec.B, {"x": "y", "y": "z", "z": "u"})
    man = Manifold(
        x_of=lambda s1, s2: np.zeros(np.shape(np.asarray(s1)))
        if np.ndim(s1) else 0.0,
        y_of=lambda s1, s2: np.asarray(s1, dtype=float),
        z_of=lambda s1, s2: np.asarray(s2, dtype=float),
        u_of=lambda s1, s2: np.broadcast_to(
            spec.h_init.eval({"x": np.asarray(s1, dtype=float),
                              "y": np.asarray(s2, dtype=float)}),
            np.broadcast(np.asarray(s1), np.asarray(s2)).shape).copy()
        if np.ndim(s1) or np.ndim(s2)
        else float(spec.h_init.eval({"x": float(s1), "y": float(s2)})),
        s1_range=(spec.x0, spec.x0 + spec.length_x),
        s2_range=(spec.y0, spec.y0 + spec.length_y),
        s1_periodic=True, s2_periodic=True)
    return QuasiLinearProblem(a1=ex.Const(1.0), a2=a2, a3=a3,
                              f=ex.Const(0.0), manifold=man,
                              period_x=None, period_y=None)


# ---------------------------------------------------------------------------
# leading-order front

def solve_h0(spec, phi_minus: ScalarField3D, phi_plus: ScalarField3D,
             times, dt: float = DEFAULT_FRONT_DT) -> FrontEvolution:
    """Evolve the leading front and re-grid it at the requested times."""
    grid = phi_minus.grid
    if phi_plus.grid != grid:
        raise FrontError("branch fields live on different grids",
                         operation="solve_h0")
    times = np.asarray(sorted(float(t) for t in times))
    if times.size == 0:
        raise FrontError("no output times requested", operation="solve_h0")
    if times[0] < 0:
        raise FrontError("negative output time", operation="solve_h0")
    _, fr_fan, fr_newton = _kernels.front_kernels(spec)
    pm = np.ascontiguousarray(phi_minus.values)
    pp = np.ascontiguousarray(phi_plus.values)
    geo = (grid.x0, grid.hx, grid.y0, grid.hy, grid.hz, grid.depth)

    # confinement sweep over the whole horizon
    X, Y = np.meshgrid(grid.xs, grid.ys, indexing="ij")
    esc = np.empty(X.size)
    fr_fan(X.ravel(), Y.ravel(), float(times[-1]), dt, pm, pp, *geo, esc)
    hit = esc[esc >= 0.0]
    if hit.size:
        raise FrontEscapeError(
            "front left the slab during evolution", float(hit.min()),
            operation="solve_h0")

    snapshots = []
    s1 = X.copy()
    s2 = Y.copy()
    for t in times:
        if t == 0.0:
            h = np.broadcast_to(spec.h_init.eval({"x": X, "y": Y}),
                                X.shape).astype(float)
        else:
            h = np.empty_like(X)
            res = np.empty_like(X)
            conv = np.empty(X.shape, dtype=np.bool_)
            fr_newton(grid.xs, grid.ys, float(t), dt, pm, pp, *geo,
                      grid.length_x, grid.length_y, grid.x0, grid.y0,
                      s1, s2, h, res, conv)
            n_fail = int(np.sum(~conv))
            if n_fail > 1e-3 * conv.size:
                raise MultivaluedFrontError(
                    f"front re-gridding failed on {n_fail}/{conv.size} "
                    f"nodes at t = {t:.6g} (fan folding?)",
                    operation="solve_h0")
            _check_fold(s1, s2, grid, t)
        snapshots.append(_make_snapshot(spec, grid, h, pm_field=phi_minus,
                                        pp_field=phi_plus, t=float(t)))
    return FrontEvolution(times=times, snapshots=snapshots)


def _check_fold(s1, s2, grid, t):
    """Orientation flip of the inverse seed map signals a folded fan."""
    ds1 = s1 - grid.xs[:, None]
    ds2 = s2 - grid.ys[None, :]
    ds1 -= grid.length_x * np.round(ds1 / grid.length_x)
    ds2 -= grid.length_y * np.round(ds2 / grid.length_y)
    j11 = 1.0 + (np.roll(ds1, -1, 0) - np.roll(ds1, 1, 0)) / (2 * grid.hx)
    j22 = 1.0 + (np.roll(ds2, -1, 1) - np.roll(ds2, 1, 1)) / (2 * grid.hy)
    j12 = (np.roll(ds1, -1, 1) - np.roll(ds1, 1, 1)) / (2 * grid.hy)
    j21 = (np.roll(ds2, -1, 0) - np.roll(ds2, 1, 0)) / (2 * grid.hx)
    det = j11 * j22 - j12 * j21
    if np.any(det <= 0.0):
        raise MultivaluedFrontError(
            f"inverse characteristic map folds at t = {t:.6g} "
            f"(min orientation {det.min():.3e})", operation="solve_h0")


def _make_snapshot(spec, grid, h, pm_field, pp_field, t):
    """Front snapshot with h_t taken from the transport equation."""
    hx, hy = periodic_gradient(h, grid.hx, grid.hy)
    X, Y = np.meshgrid(grid.xs, grid.ys, indexing="ij")
    a = np.broadcast_to(spec.A.eval({"x": X, "y": Y, "z": h}), h.shape)
    b = np.broadcast_to(spec.B.eval({"x": X, "y": Y, "z": h}), h.shape)
    rhs = -0.5 * (trilinear_sample(pm_field, X, Y, np.clip(h, 0, grid.depth))
                  + trilinear_sample(pp_field, X, Y,
                                     np.clip(h, 0, grid.depth)))
    ht = rhs - a * hx - b * hy
    return FrontSurface(grid, h, h_t=ht, time=t)


# ---------------------------------------------------------------------------
# surface-point layer data

def surface_params(spec, surf: FrontSurface, outer_minus, outer_plus,
                   l, m, shape_for_profiles: bool = False) -> LayerParams:
    """LayerParams at surface points (l, m); arrays broadcast."""
    g = surf.grid
    l = np.asarray(l, dtype=float)
    m = np.asarray(m, dtype=float)
    h = surf.sample(l, m)
    hx, hy = surf.sample_slopes(l, m)
    ht = surf.sample_ht(l, m)
    lw = g.x0 + np.mod(l - g.x0, g.length_x)
    mw = g.y0 + np.mod(m - g.y0, g.length_y)
    a = spec.A.eval({"x": lw, "y": mw, "z": h})
    b = spec.B.eval({"x": lw, "y": mw, "z": h})
    v = ht + a * hx + b * hy
    hc = np.clip(h, 0.0, g.depth)
    pm = trilinear_sample(outer_minus.phi, l, m, hc)
    pp = trilinear_sample(outer_plus.phi, l, m, hc)
    az = 1.0 / np.sqrt(1.0 + hx ** 2 + hy ** 2)
    if shape_for_profiles:
        v, pm, pp, az = (np.asarray(q)[..., None] for q in (v, pm, pp, az))
    return LayerParams(V=v, phi_minus=pm, phi_plus=pp, alpha_z=az)


def _sample_branch(outer, l, m, h):
    """phi, (phi_x, phi_y, phi_z) and u1 of one branch at surface points."""
    hc = np.clip(h, 0.0, outer.grid.depth)
    phi = trilinear_sample(outer.phi, l, m, hc)
    px = trilinear_sample(outer.phi_x, l, m, hc)
    py = trilinear_sample(outer.phi_y, l, m, hc)
    pz = trilinear_sample(outer.phi_z, l, m, hc)
    if outer.u1 is None:
        u1 = np.zeros(np.shape(phi))
    else:
        u1 = trilinear_sample(outer.u1, l, m, hc)
    return phi, (px, py, pz), u1


def make_f1(spec, evolution: FrontEvolution, time, outer_minus, outer_plus,
            branch: str, l, m, dl_rel: float = 1e-5, dt_rel: float = 1e-5):
    """Layer-source callable f1(xi) for points (l, m) at one time.

    Assembles the first-order inhomogeneity of the linearized layer
    equation: curvature and coefficient-gradient terms proportional to
    the layer slope, advection of the zero-order profile along the
    surface (dQ0/dl, dQ0/dm by differencing through the profile's
    parameters; dQ0/dt through time-shifted snapshots), outer-gradient
    terms, and the nonlinear source increment. Returns a callable
    mapping xi arrays of shape (..., n) broadcastable against the point
    arrays to f1 values.
    """
    surf = evolution.at_time(time)
    g = surf.grid
    l = np.atleast_1d(np.asarray(l, dtype=float))
    m = np.atleast_1d(np.asarray(m, dtype=float))
    h = surf.sample(l, m)
    hx, hy = surf.sample_slopes(l, m)
    ht = surf.sample_ht(l, m)
    hxx_g, hyy_g, hxy_g = surf.second_derivatives()
    hxx = surf._bilinear(hxx_g, l, m)
    hyy = surf._bilinear(hyy_g, l, m)
    hxy = surf._bilinear(hxy_g, l, m)
    lw = g.x0 + np.mod(l - g.x0, g.length_x)
    mw = g.y0 + np.mod(m - g.y0, g.length_y)
    bind = {"x": lw, "y": mw, "z": h}
    a_val = np.broadcast_to(spec.A.eval(bind), l.shape)
    b_val = np.broadcast_to(spec.B.eval(bind), l.shape)
    d_a = [np.broadcast_to(spec.A.diff(v).eval(bind), l.shape)
           for v in ("x", "y", "z")]
    d_b = [np.broadcast_to(spec.B.diff(v).eval(bind), l.shape)
           for v in ("x", "y", "z")]
    outer = outer_minus if branch == "minus" else outer_plus
    phi, (px, py, pz), u1 = _sample_branch(outer, l, m, h)

    params0 = surface_params(spec, surf, outer_minus, outer_plus, l, m,
                             shape_for_profiles=True)
    params0.validate()
    az = params0.alpha_z[..., 0]
    az2 = az ** 2
    az3 = az ** 3

    # parameter bundles for the profile's surface derivatives
    dl = dl_rel * g.length_x
    dm = dl_rel * g.length_y
    span = max(float(evolution.times[-1] - evolution.times[0]), 1e-12)
    dt_fd = dt_rel * span
    t_lo = max(float(time) - dt_fd, float(evolution.times[0]))
    t_hi = min(float(time) + dt_fd, float(evolution.times[-1]))
    p_l = [surface_params(spec, surf, outer_minus, outer_plus, l + s * dl, m,
                          shape_for_profiles=True) for s in (-1, 1)]
    p_m = [surface_params(spec, surf, outer_minus, outer_plus, l, m + s * dm,
                          shape_for_profiles=True) for s in (-1, 1)]
    p_t = [surface_params(spec, evolution.at_time(tv), outer_minus,
                          outer_plus, l, m, shape_for_profiles=True)
           for tv in (t_lo, t_hi)]

    c_curv = az3 * ((hx ** 2 + 1) * hyy + (hy ** 2 + 1) * hxx
                    - 2 * hx * hy * hxy)
    c_xi = az2 * (d_a[0] * hx ** 2 + hx * hy * (d_a[1] + d_b[0]) + d_b[1]
                  - hx * d_a[2] - hy * d_b[2]) \
        + az2 * (px * hx + py * hy - pz)
    c_u1 = az * u1
    adv_l = az2 * ((hy ** 2 + 1) * a_val)
    adv_l_u = az2 * hx
    adv_m = az2 * ((hx ** 2 + 1) * b_val)
    adv_m_u = az2 * hy

    def f1(xi):
        xi = np.asarray(xi, dtype=float)
        q0 = q0_profile(xi, branch, params0, check=False)
        u_t = phi[..., None] + q0
        slope = phase_trajectory(u_t, branch, params0)
        dq_dl = (q0_profile(xi, branch, p_l[1], check=False)
                 - q0_profile(xi, branch, p_l[0], check=False)) / (2 * dl)
        dq_dm = (q0_profile(xi, branch, p_m[1], check=False)
                 - q0_profile(xi, branch, p_m[0], check=False)) / (2 * dm)
        dq_dt = (q0_profile(xi, branch, p_t[1], check=False)
                 - q0_profile(xi, branch, p_t[0], check=False)) \
            / max(t_hi - t_lo, 1e-300)
        f_shift = spec.F.eval({"u": u_t, "x": lw[..., None],
                               "y": mw[..., None], "z": h[..., None]}) \
            - spec.F.eval({"u": phi[..., None], "x": lw[..., None],
                           "y": mw[..., None], "z": h[..., None]})
        coef_l = adv_l[..., None] - adv_l_u[..., None] \
            * (ht[..., None] + hy[..., None] * b_val[..., None] + u_t)
        coef_m = adv_m[..., None] - adv_m_u[..., None] \
            * (ht[..., None] + hx[..., None] * a_val[..., None] + u_t)
        out = ((c_curv[..., None] + xi * c_xi[..., None]
                - c_u1[..., None]) * slope
               + coef_l * dq_dl + coef_m * dq_dm + dq_dt
               + (a_val * px + b_val * py)[..., None]
               - u_t * pz[..., None]
               + f_shift)
        return out

    return f1, params0, u1


def eval_H1(spec, evolution: FrontEvolution, time, outer_minus, outer_plus,
            l, m, n_mesh: int = 400):
    """First-order matching jump H1 at surface points (l, m)."""
    surf = evolution.at_time(time)
    l = np.atleast_1d(np.asarray(l, dtype=float))
    m = np.atleast_1d(np.asarray(m, dtype=float))
    h = surf.sample(l, m)
    hx, hy = surf.sample_slopes(l, m)
    ax, ay, az = normal_angles(hx, hy)
    slopes = {}
    for branch in ("minus", "plus"):
        f1, params, u1 = make_f1(spec, evolution, time, outer_minus,
                                 outer_plus, branch, l, m)
        sign = -1.0 if branch == "minus" else 1.0
        rate = params.decay_rate(branch)[..., 0]
        xi_max = 35.0 / rate
        j = (np.arange(n_mesh + 1, dtype=float) / n_mesh) ** 2
        mesh = sign * xi_max[..., None] * j
        f1v = f1(mesh)
        seg = 0.5 * (f1v[..., 1:] + f1v[..., :-1]) * np.diff(mesh, axis=-1)
        inner0 = -np.sum(seg, axis=-1)     # integral from the branch infinity
        v_star = params.V[..., 0] + params.phi_star[..., 0]
        slopes[branch] = u1 * az * v_star + inner0
    _, (pxm, pym, pzm), _ = _sample_branch(outer_minus, l, m, h)
    _, (pxp, pyp, pzp), _ = _sample_branch(outer_plus, l, m, h)
    out = (slopes["minus"] - slopes["plus"]
           - ax * pxm - ay * pym + az * pzm
           + ax * pxp + ay * pyp - az * pzp)
    return out if out.shape != (1,) else float(out[0])


def q1_context_at(spec, evolution, time, outer_minus, outer_plus, branch,
                  l, m, n_mesh: int = 400) -> Q1Context:
    """Pointwise Q1 bundle for one surface point."""
    f1, params, u1 = make_f1(spec, evolution, time, outer_minus, outer_plus,
                             branch, np.atleast_1d(l)[:1],
                             np.atleast_1d(m)[:1])
    scalar_params = LayerParams(
        V=float(params.V[0, 0]), phi_minus=float(params.phi_minus[0, 0]),
        phi_plus=float(params.phi_plus[0, 0]),
        alpha_z=float(params.alpha_z[0, 0]))
    return Q1Context(params=scalar_params, u1=float(np.atleast_1d(u1)[0]),
                     f1=lambda xi: f1(np.asarray(xi)[None, :])[0],
                     n_mesh=n_mesh)


# ---------------------------------------------------------------------------
# first-order front correction

def _h0_slot_value(spec, phi_minus, phi_plus, X, Y, h, hx, hy, ht):
    """H0 as a function of independent slots (h, h_x, h_y, h_t)."""
    g = phi_minus.grid
    hc = np.clip(h, 0.0, g.depth)
    pm = trilinear_sample(phi_minus, X, Y, hc)
    pp = trilinear_sample(phi_plus, X, Y, hc)
    a = np.broadcast_to(spec.A.eval({"x": X, "y": Y, "z": hc}), X.shape)
    b = np.broadcast_to(spec.B.eval({"x": X, "y": Y, "z": hc}), X.shape)
    v = ht + a * hx + b * hy
    az = 1.0 / np.sqrt(1.0 + hx ** 2 + hy ** 2)
    return eval_H0_closed(v, pm, pp, az)


def h1_coefficient_stacks(spec, evolution: FrontEvolution, outer_minus,
                          outer_plus, n_mesh: int = 200):
    """Coefficient stacks (nx, ny, nt) for the h1 transport equation."""
    g = evolution.grid
    nt = evolution.times.size
    X, Y = np.meshgrid(g.xs, g.ys, indexing="ij")
    cx = np.empty((g.nx, g.ny, nt))
    cy = np.empty_like(cx)
    chh = np.empty_like(cx)
    src = np.empty_like(cx)
    azs = np.empty_like(cx)
    pm_f, pp_f = outer_minus.phi, outer_plus.phi
    for k, (t, surf) in enumerate(zip(evolution.times, evolution.snapshots)):
        h, hx, hy, ht = surf.h, surf.h_x, surf.h_y, surf.h_t
        dh = 1e-6 * np.maximum(np.abs(h), 1.0)
        dslope = 1e-6 * np.maximum(np.abs(hx), 1.0)

        def H0(hh, hxx, hyy):
            return _h0_slot_value(spec, pm_f, pp_f, X, Y, hh, hxx, hyy, ht)

        chh[:, :, k] = (H0(h + dh, hx, hy) - H0(h - dh, hx, hy)) / (2 * dh)
        cx[:, :, k] = (H0(h, hx + dslope, hy) - H0(h, hx - dslope, hy)) \
            / (2 * dslope)
        dslope_y = 1e-6 * np.maximum(np.abs(hy), 1.0)
        cy[:, :, k] = (H0(h, hx, hy + dslope_y) - H0(h, hx, hy - dslope_y)) \
            / (2 * dslope_y)
        azs[:, :, k] = 1.0 / np.sqrt(1.0 + hx ** 2 + hy ** 2)
        src[:, :, k] = np.asarray(
            eval_H1(spec, evolution, t, outer_minus, outer_plus,
                    X.ravel(), Y.ravel(), n_mesh=n_mesh)).reshape(X.shape)
    return {"cx": cx, "cy": cy, "ch": chh, "src": src, "az": azs}


def solve_h1(spec, evolution: FrontEvolution, outer_minus, outer_plus,
             times, dt: float = DEFAULT_FRONT_DT,
             stacks=None, n_mesh: int = 200) -> FrontEvolution:
    """First-order front correction with zero initial data."""
    g = evolution.grid
    times = np.asarray(sorted(float(t) for t in times))
    if times[-1] > evolution.times[-1] + 1e-12:
        raise FrontError("h1 requested beyond the tabulated evolution",
                         operation="solve_h1")
    if stacks is None:
        stacks = h1_coefficient_stacks(spec, evolution, outer_minus,
                                       outer_plus, n_mesh=n_mesh)
    nt = evolution.times.size
    if nt < 2:
        raise FrontError("h1 needs at least two snapshots",
                         operation="solve_h1")
    ht_step = float(evolution.times[-1] - evolution.times[0]) / (nt - 1)
    if not np.allclose(np.diff(evolution.times), ht_step, rtol=1e-6):
        raise FrontError("h1 stacks need uniformly spaced snapshots",
                         operation="solve_h1")
    _, h1_newton = _kernels.h1_kernels()
    X, Y = np.meshgrid(g.xs, g.ys, indexing="ij")
    s1 = X.copy()
    s2 = Y.copy()
    args = (np.ascontiguousarray(stacks["cx"]),
            np.ascontiguousarray(stacks["cy"]),
            np.ascontiguousarray(stacks["ch"]),
            np.ascontiguousarray(stacks["src"]),
            np.ascontiguousarray(stacks["az"]),
            g.x0, g.hx, g.y0, g.hy, ht_step)
    out_snaps = []
    for t in times:
        v = np.empty_like(X)
        if t == 0.0:
            v[:] = 0.0
        else:
            res = np.empty_like(X)
            conv = np.empty(X.shape, dtype=np.bool_)
            h1_newton(g.xs, g.ys, float(t), dt, *args,
                      g.length_x, g.length_y, g.x0, g.y0,
                      s1, s2, v, res, conv)
            n_fail = int(np.sum(~conv))
            if n_fail > 1e-3 * conv.size:
                raise MultivaluedFrontError(
                    f"h1 re-gridding failed on {n_fail}/{conv.size} nodes "
                    f"at t = {t:.6g}", operation="solve_h1")
        vx, vy = periodic_gradient(v, g.hx, g.hy)
        kidx = min(int(round((t - evolution.times[0]) / ht_step)), nt - 1)
        v_t = -(stacks["cx"][:, :, kidx] * vx
                + stacks["cy"][:, :, kidx] * vy
                + stacks["ch"][:, :, kidx] * v
                + stacks["src"][:, :, kidx]) / stacks["az"][:, :, kidx]
        out_snaps.append(FrontSurface(g, v, h_t=v_t, time=float(t),
                                      bounded=False))
    return FrontEvolution(times=times, snapshots=out_snaps, correction=True)
