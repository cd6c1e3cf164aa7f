"""Uniform composite approximations over the grid.

Order 0: each node is projected onto the front surface; the node value
is the outer branch picked by the side of the front plus the layer
profile Q0 at the stretched distance xi = r/mu. Nodes farther than
60/(alpha_z |P|) stretched units from the surface take the outer value
alone (the layer term is below 1e-26 there, and skipping it avoids
overflow in the profile exponentials).

Order 1 adds mu * (u1 + Q1) with the stretched coordinate measured from
the corrected surface h0 + mu*h1. Q1 profiles are tabulated on the
front grid's sample columns (graded xi mesh per sample) and blended
bilinearly between columns.

A separate fast-path mode reproduces the worked example's printed
closed-form blend (its slope factor (1 - h_x - h_y) differs from the
general geometry's normalization; the two modes agree on flat fronts
and are compared in the run report otherwise).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import front as fr
from . import layer as ly
from .errors import AssembleError
from .grid import Grid3D, ScalarField3D, trilinear_sample
from .surface import FrontSurface

XI_CUTOFF = 60.0
_EXP_CLIP = 700.0


@dataclass
class AsymptoticSolution:
    """Assembled approximation at one time."""

    order: int
    field: ScalarField3D
    mu: float
    time: float
    problem: str
    mode: str


def _layer_band(spec, surface, outer_minus, outer_plus, mu):
    """Vertical half-width within which nodes need true projection.

    Outside the band the distance to the surface provably exceeds the
    layer cutoff (distance >= vertical gap / (sqrt(2) max(1, |grad h|))),
    so the layer term is negligible and the side of the front follows
    from the local column. Surface-sample layer parameters are validated
    here, which is the precondition for assembling at all.
    """
    g2 = surface.grid
    X, Y = np.meshgrid(g2.xs, g2.ys, indexing="ij")
    params = fr.surface_params(spec, surface, outer_minus, outer_plus,
                               X.ravel(), Y.ravel())
    params.validate()
    min_rate = min(float(np.min(params.decay_rate("minus"))),
                   float(np.min(params.decay_rate("plus"))))
    r_cut = XI_CUTOFF * mu / min_rate
    lip = float(np.sqrt(surface.h_x ** 2 + surface.h_y ** 2).max())
    band = 1.05 * np.sqrt(2.0) * max(1.0, lip) * r_cut
    relief = float(surface.h.max() - surface.h.min())
    if relief >= 0.5 * band:
        band = np.inf      # wild surface: project every node
    return band


def assemble_U0(spec, outer_minus, outer_plus, front: FrontSurface,
                grid: Grid3D, mode: str = "general",
                mu: float = None) -> AsymptoticSolution:
    """Leading-order composite approximation at the front's time."""
    mu = spec.mu if mu is None else float(mu)
    if mode == "fastpath":
        field = _fastpath_field(spec, outer_minus, outer_plus, front, grid,
                                mu)
    elif mode == "general":
        field = _general_u0_field(spec, outer_minus, outer_plus, front,
                                  grid, mu)
    else:
        raise AssembleError(f"unknown mode '{mode}'", operation="assemble_U0")
    return AsymptoticSolution(order=0, field=field, mu=mu, time=front.time,
                              problem=spec.name, mode=mode)


def _node_frames(spec, surface, outer_minus, outer_plus, grid, mu):
    """Projection data for all grid nodes, restricted to the layer band."""
    band = _layer_band(spec, surface, outer_minus, outer_plus, mu)
    X, Y, Z = grid.meshgrid()
    xf, yf, zf = X.ravel(), Y.ravel(), Z.ravel()
    hcol = np.asarray(surface.sample(xf, yf))
    near = np.abs(zf - hcol) <= band
    minus_side = zf < hcol
    xi = np.where(minus_side, -np.inf, np.inf)
    l = xf.copy()
    m = yf.copy()
    if np.any(near):
        frame = ly.project_to_front(xf[near], yf[near], zf[near], surface,
                                    mu=mu)
        xi[near] = np.asarray(frame.xi)
        minus_side[near] = np.asarray(frame.r) < 0.0
        l[near] = frame.l
        m[near] = frame.m
    params = fr.surface_params(spec, surface, outer_minus, outer_plus, l, m)
    return xi, minus_side, near, l, m, params


def _general_u0_field(spec, outer_minus, outer_plus, front, grid, mu):
    xi, minus_side, near, _l, _m, params = _node_frames(
        spec, front, outer_minus, outer_plus, grid, mu)
    out = np.where(minus_side, outer_minus.phi.values.ravel(),
                   outer_plus.phi.values.ravel()).astype(float)
    for branch, side in (("minus", minus_side), ("plus", ~minus_side)):
        cut = XI_CUTOFF / params.decay_rate(branch)
        sel = side & near & (np.abs(xi) <= cut)
        if not np.any(sel):
            continue
        sub = ly.LayerParams(
            V=np.asarray(params.V)[sel],
            phi_minus=np.asarray(params.phi_minus)[sel],
            phi_plus=np.asarray(params.phi_plus)[sel],
            alpha_z=np.asarray(params.alpha_z)[sel])
        out[sel] += ly.q0_profile(xi[sel], branch, sub, check=False)
    return ScalarField3D(grid, out.reshape(grid.nx, grid.ny, grid.nz),
                         time=front.time)


def _fastpath_field(spec, outer_minus, outer_plus, front, grid, mu):
    """Printed closed-form blend of the worked example."""
    h0 = front.h[:, :, None]
    h0x = front.h_x[:, :, None]
    h0y = front.h_y[:, :, None]
    X, Y, Z = grid.meshgrid()
    hc = np.clip(front.h, 0.0, grid.depth)
    X2, Y2 = np.meshgrid(grid.xs, grid.ys, indexing="ij")
    pm_h = trilinear_sample(outer_minus.phi, X2, Y2, hc)[:, :, None]
    pp_h = trilinear_sample(outer_plus.phi, X2, Y2, hc)[:, :, None]
    jump = pm_h - pp_h
    phi_star_arg = (h0 - Z) * jump * (1.0 - h0x - h0y) / (2.0 * mu)
    phi_star_arg = np.clip(phi_star_arg, -_EXP_CLIP, _EXP_CLIP)
    below = Z <= h0
    vals = np.where(
        below,
        outer_minus.phi.values - jump / (np.exp(-phi_star_arg) + 1.0),
        outer_plus.phi.values + jump / (np.exp(phi_star_arg) + 1.0))
    return ScalarField3D(grid, vals, time=front.time)


def corrected_surface(evolution0: fr.FrontEvolution,
                      evolution1: fr.FrontEvolution, time: float,
                      mu: float) -> FrontSurface:
    """First-order front h0 + mu*h1 at one time."""
    s0 = evolution0.at_time(time)
    s1 = evolution1.at_time(time)
    return FrontSurface(s0.grid, s0.h + mu * s1.h,
                        h_t=s0.h_t + mu * s1.h_t, time=time)


def assemble_U1(spec, outer_minus, outer_plus,
                evolution0: fr.FrontEvolution,
                evolution1: fr.FrontEvolution, time: float, grid: Grid3D,
                mu: float = None, n_mesh: int = 400) -> AsymptoticSolution:
    """First-order composite approximation at one time.

    Requires u1 on both outer branches and the h1 correction series;
    the stretched coordinate is measured from the corrected surface.
    """
    mu = spec.mu if mu is None else float(mu)
    for outer in (outer_minus, outer_plus):
        if outer.u1 is None:
            raise AssembleError("outer u1 terms missing; run compute_u1",
                                operation="assemble_U1")
    surface = corrected_surface(evolution0, evolution1, time, mu)
    xi, minus_side, near, l, m, params = _node_frames(
        spec, surface, outer_minus, outer_plus, grid, mu)
    out = np.where(minus_side,
                   outer_minus.phi.values.ravel()
                   + mu * outer_minus.u1.values.ravel(),
                   outer_plus.phi.values.ravel()
                   + mu * outer_plus.u1.values.ravel()).astype(float)
    g2 = surface.grid
    for branch, side in (("minus", minus_side), ("plus", ~minus_side)):
        cut = XI_CUTOFF / params.decay_rate(branch)
        sel = side & near & (np.abs(xi) <= cut)
        if not np.any(sel):
            continue
        sub = ly.LayerParams(
            V=np.asarray(params.V)[sel],
            phi_minus=np.asarray(params.phi_minus)[sel],
            phi_plus=np.asarray(params.phi_plus)[sel],
            alpha_z=np.asarray(params.alpha_z)[sel])
        out[sel] += ly.q0_profile(xi[sel], branch, sub, check=False)
        mesh, table = _q1_tables(spec, evolution0, evolution1, time,
                                 outer_minus, outer_plus, branch, mu, n_mesh)
        q1v = _eval_q1_table(mesh, table, g2, l[sel], m[sel], xi[sel])
        out[sel] += mu * q1v
    field = ScalarField3D(grid, out.reshape(grid.nx, grid.ny, grid.nz),
                          time=time)
    return AsymptoticSolution(order=1, field=field, mu=mu, time=time,
                              problem=spec.name, mode="general")


def _q1_tables(spec, evolution0, evolution1, time, outer_minus, outer_plus,
               branch, mu, n_mesh):
    """Q1 profiles tabulated on the front grid's sample columns."""
    ev = _corrected_evolution(evolution0, evolution1, mu)
    g2 = ev.grid
    X, Y = np.meshgrid(g2.xs, g2.ys, indexing="ij")
    f1, params, u1 = fr.make_f1(spec, ev, time, outer_minus, outer_plus,
                                branch, X.ravel(), Y.ravel())
    sign = -1.0 if branch == "minus" else 1.0
    rate = params.decay_rate(branch)[:, 0]
    xi_max = 35.0 / rate
    j = (np.arange(n_mesh + 1, dtype=float) / n_mesh) ** 2
    mesh = sign * xi_max[:, None] * j
    f1v = f1(mesh)
    phi_xi = ly.q0_xi_derivative(mesh, branch, params)
    seg = 0.5 * (f1v[:, 1:] + f1v[:, :-1]) * np.diff(mesh, axis=1)
    c = np.concatenate([np.zeros((mesh.shape[0], 1)), np.cumsum(seg, axis=1)],
                       axis=1)
    inner = c - c[:, -1:]
    outer_integrand = inner / phi_xi
    seg2 = 0.5 * (outer_integrand[:, 1:] + outer_integrand[:, :-1]) \
        * np.diff(mesh, axis=1)
    d = np.concatenate([np.zeros((mesh.shape[0], 1)),
                        np.cumsum(seg2, axis=1)], axis=1)
    u1c = np.asarray(u1)
    table = -u1c[:, None] * phi_xi / phi_xi[:, 0:1] + phi_xi * d
    return mesh, table


def _corrected_evolution(evolution0, evolution1, mu):
    snaps = []
    for t in evolution0.times:
        s0 = evolution0.at_time(t)
        s1 = evolution1.at_time(t)
        snaps.append(FrontSurface(s0.grid, s0.h + mu * s1.h,
                                  h_t=s0.h_t + mu * s1.h_t, time=float(t)))
    return fr.FrontEvolution(times=evolution0.times, snapshots=snaps)


def _eval_q1_table(mesh, table, g2, l, m, xi):
    """Bilinear-in-(l,m), graded-mesh-in-xi lookup of the Q1 tables."""
    n_mesh = mesh.shape[1] - 1
    fx = (l - g2.x0) / g2.hx
    fy = (m - g2.y0) / g2.hy
    i0 = np.floor(fx).astype(np.int64) % g2.nx
    j0 = np.floor(fy).astype(np.int64) % g2.ny
    wx = fx - np.floor(fx)
    wy = fy - np.floor(fy)
    i1 = (i0 + 1) % g2.nx
    j1 = (j0 + 1) % g2.ny
    out = np.zeros_like(xi)
    for (ii, jj, w) in ((i0, j0, (1 - wx) * (1 - wy)),
                        (i1, j0, wx * (1 - wy)),
                        (i0, j1, (1 - wx) * wy),
                        (i1, j1, wx * wy)):
        col = ii * g2.ny + jj
        ximax = np.abs(mesh[col, -1])
        frac = n_mesh * np.sqrt(np.minimum(np.abs(xi) / ximax, 1.0))
        k0 = np.minimum(frac.astype(np.int64), n_mesh - 1)
        wk = frac - k0
        vals = table[col, k0] * (1 - wk) + table[col, k0 + 1] * wk
        out += w * vals
    return out
