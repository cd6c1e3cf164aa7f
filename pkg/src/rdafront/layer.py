"""Transition-layer machinery: local frame, phase plane, Q0/Q1 profiles.

Local geometry: a point (x, y, z) is written as

    x = l - r*alpha_x,  y = m - r*alpha_y,  z = h(l, m) + r*alpha_z,

where (l, m) is the closest surface point under the periodic metric,
(alpha_x, alpha_y, alpha_z) = (h_x, h_y, 1)/sqrt(1 + h_x^2 + h_y^2),
and r is the signed normal distance, positive above the surface
(z > h). The displacement r*(-alpha_x, -alpha_y, alpha_z) is the true
unit normal, so |r| is the Euclidean distance to the surface. The
stretched coordinate is xi = r/mu.

Phase plane: with V = h_t + A h_x + B h_y, the layer ODE
u'' + alpha_z (V + u) u' = 0 has first integrals

    Phi_branch(u) = alpha_z [ V (phi - u) + (phi^2 - u^2)/2 ],

quadratics vanishing at the branch's rest state phi and at -2V - phi.
Separating du/Phi = dxi gives the explicit layer profile

    Q0(xi) = 2 P K / (exp(alpha_z P xi) - K),    K = D / (2P + D),

with P = V + phi and D = phi* - phi fixed by the matching value at
xi = 0. A decaying connecting profile exists iff 2P + D < 0 on the
lower branch and 2P + D > 0 on the upper one (equivalently K < 0; at
the leading front-equation root K = -1 exactly). Note the sign: the
lower branch needs P < 0 and the upper P > 0.

Q1 solves the linearized layer equation; its variation-of-constants
representation is integrated on a graded mesh clustered at xi = 0 with
the improper inner integral truncated where the integrand falls below
1e-12 of its peak.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import LayerAssemblyError, LayerExistenceError, ProjectionError
from .surface import FrontSurface

_EXP_CLIP = 700.0


def normal_angles(h_x, h_y):
    """Direction cosines (alpha_x, alpha_y, alpha_z) of the front normal."""
    root = np.sqrt(1.0 + np.asarray(h_x) ** 2 + np.asarray(h_y) ** 2)
    return h_x / root, h_y / root, 1.0 / root


@dataclass(frozen=True)
class LayerParams:
    """Per-surface-point layer data; accepts scalars or equal-shape arrays."""

    V: object          # h_t + A h_x + B h_y
    phi_minus: object
    phi_plus: object
    alpha_z: object

    @property
    def phi_star(self):
        return 0.5 * (np.asarray(self.phi_minus) + np.asarray(self.phi_plus))

    @property
    def P_minus(self):
        return np.asarray(self.V) + np.asarray(self.phi_minus)

    @property
    def P_plus(self):
        return np.asarray(self.V) + np.asarray(self.phi_plus)

    def phi(self, branch):
        return np.asarray(self.phi_minus if branch == "minus"
                          else self.phi_plus)

    def P(self, branch):
        return self.P_minus if branch == "minus" else self.P_plus

    def delta(self, branch):
        return self.phi_star - self.phi(branch)

    def validate(self):
        """Ordering phi- < phi* < phi+ and profile-existence inequalities."""
        pm = np.asarray(self.phi_minus)
        pp = np.asarray(self.phi_plus)
        if not np.all(pm < pp):
            raise LayerExistenceError("need phi- < phi+ at the surface",
                                      operation="LayerParams")
        em = 2 * self.P_minus + self.delta("minus")
        ep = 2 * self.P_plus + self.delta("plus")
        if not (np.all(em < 0.0) and np.all(ep > 0.0)):
            raise LayerExistenceError(
                "layer-profile existence violated: need "
                "2 P- + (phi* - phi-) < 0 < 2 P+ + (phi* - phi+) "
                f"(got ranges [{np.min(em):.3g}, {np.max(em):.3g}] and "
                f"[{np.min(ep):.3g}, {np.max(ep):.3g}])",
                operation="LayerParams")

    def decay_rate(self, branch):
        """Exponential rate alpha_z |P| of the branch profile."""
        return np.abs(np.asarray(self.alpha_z) * self.P(branch))


def phase_trajectory(u_tilde, branch: str, params: LayerParams):
    """First integral Phi_branch(u~) of the layer ODE; zero at u~ = phi."""
    phi = params.phi(branch)
    v = np.asarray(params.V)
    return np.asarray(params.alpha_z) * (
        v * (phi - u_tilde) + 0.5 * (phi ** 2 - np.asarray(u_tilde) ** 2))


def q0_profile(xi, branch: str, params: LayerParams, check: bool = True):
    """Layer profile Q0(xi): Q0(0) = phi* - phi, decaying toward the
    branch's infinity."""
    if check:
        params.validate()
    phi = params.phi(branch)
    p = params.P(branch)
    d = params.delta(branch)
    denom = 2 * p + d
    k = np.where(np.asarray(denom) != 0.0, d / np.where(denom == 0, 1, denom),
                 0.0)
    expo = np.clip(np.asarray(params.alpha_z) * p * np.asarray(xi),
                   -_EXP_CLIP, _EXP_CLIP)
    return 2 * p * k / (np.exp(expo) - k)


def q0_xi_derivative(xi, branch: str, params: LayerParams):
    """dQ0/dxi along the profile, via the first integral."""
    u = params.phi(branch) + q0_profile(xi, branch, params, check=False)
    return phase_trajectory(u, branch, params)


@dataclass
class LocalFrame:
    """Front-local coordinates of points: foot (l, m), signed distance r,
    stretched xi (when mu was supplied), and the normal cosines."""

    l: object
    m: object
    r: object
    alpha_x: object
    alpha_y: object
    alpha_z: object
    xi: Optional[object] = None


def project_to_front(x, y, z, surface: FrontSurface, mu: float = None,
                     tol: float = 1e-8, max_iters: int = 25) -> LocalFrame:
    """Closest-point projection onto the surface (periodic metric).

    Newton iteration on the stationarity system

        wrap(l - x) + (h - z) h_x = 0,   wrap(m - y) + (h - z) h_y = 0,

    started from (l, m) = (x, y); among equidistant feet the iteration
    settles on the one nearest the start, which implements the smallest
    |(l, m) - (x, y)| tie-break. r is signed positive where z > h.
    """
    g = surface.grid
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    shape = np.broadcast(x, y, z).shape
    l = np.broadcast_to(x, shape).astype(float).copy()
    m = np.broadcast_to(y, shape).astype(float).copy()
    zb = np.broadcast_to(z, shape)
    Lx, Ly = g.length_x, g.length_y

    def wrapdx(d):
        return d - Lx * np.round(d / Lx)

    def wrapdy(d):
        return d - Ly * np.round(d / Ly)

    def residual(lc, mc):
        h = surface.sample(lc, mc)
        hx, hy = surface.sample_slopes(lc, mc)
        g1 = wrapdx(lc - x) + (h - zb) * hx
        g2 = wrapdy(mc - y) + (h - zb) * hy
        return g1, g2

    d1 = 1e-7 * Lx
    d2 = 1e-7 * Ly
    g1, g2 = residual(l, m)
    norm = np.hypot(g1, g2)
    ok = norm <= tol
    for _ in range(max_iters):
        if np.all(ok):
            break
        g1a, g2a = residual(l + d1, m)
        g1b, g2b = residual(l, m + d2)
        j11 = (g1a - g1) / d1
        j12 = (g1b - g1) / d2
        j21 = (g2a - g2) / d1
        j22 = (g2b - g2) / d2
        det = j11 * j22 - j12 * j21
        det = np.where(np.abs(det) < 1e-300, 1.0, det)
        dl = np.where(ok, 0.0, (g1 * j22 - j12 * g2) / det)
        dm = np.where(ok, 0.0, (j11 * g2 - g1 * j21) / det)
        # backtracking guards against the slope-interpolation kinks at
        # cell edges, where a full step can cycle
        lam = np.ones_like(dl)
        l_new, m_new = l - dl, m - dm
        g1n, g2n = residual(l_new, m_new)
        norm_new = np.hypot(g1n, g2n)
        for _bt in range(8):
            worse = ~ok & (norm_new > norm * (1.0 - 1e-4))
            if not np.any(worse):
                break
            lam = np.where(worse, 0.5 * lam, lam)
            l_new = np.where(worse, l - lam * dl, l_new)
            m_new = np.where(worse, m - lam * dm, m_new)
            g1n, g2n = residual(l_new, m_new)
            norm_new = np.hypot(g1n, g2n)
        l, m, g1, g2, norm = l_new, m_new, g1n, g2n, norm_new
        ok = ok | (norm <= tol)
    if not np.all(ok):
        n_bad = int(np.sum(~ok))
        raise ProjectionError(
            f"closest-point Newton failed at {n_bad}/{ok.size} points "
            f"(worst residual {float(np.max(np.hypot(g1, g2))):.3e})",
            operation="project_to_front")
    l = g.x0 + np.mod(l - g.x0, Lx)
    m = g.y0 + np.mod(m - g.y0, Ly)
    h = surface.sample(l, m)
    hx, hy = surface.sample_slopes(l, m)
    ax, ay, az = normal_angles(hx, hy)
    dist = np.sqrt(wrapdx(x - l) ** 2 + wrapdy(y - m) ** 2 + (zb - h) ** 2)
    r = np.where(zb >= h, dist, -dist)
    if shape == ():
        l, m, r = float(l), float(m), float(r)
        ax, ay, az = float(ax), float(ay), float(az)
    return LocalFrame(l=l, m=m, r=r, alpha_x=ax, alpha_y=ay, alpha_z=az,
                      xi=(r / mu if mu is not None else None))


# ---------------------------------------------------------------------------
# first-order layer profile

@dataclass
class Q1Context:
    """Per-point data bundle for the first-order profile.

    `f1` maps an array of xi values to the inhomogeneity of the
    linearized layer equation; None means identically zero. `u1` is the
    outer first-order correction at the surface point, which fixes the
    boundary value Q1(0) = -u1.
    """

    params: LayerParams
    u1: float = 0.0
    f1: Optional[Callable] = None
    n_mesh: int = 400
    tail: float = 35.0
    _table: tuple = field(default=None, repr=False)


def _q1_table(branch: str, ctx: Q1Context):
    """Graded-mesh evaluation of the variation-of-constants formula."""
    params = ctx.params
    params.validate()
    sign = -1.0 if branch == "minus" else 1.0
    rate = float(params.decay_rate(branch))
    xi_max = ctx.tail / rate
    j = np.arange(ctx.n_mesh + 1, dtype=float) / ctx.n_mesh
    mesh = sign * xi_max * j ** 2            # 0 ... +-xi_max, clustered at 0
    if ctx.f1 is None:
        f1v = np.zeros_like(mesh)
    else:
        f1v = np.asarray(ctx.f1(mesh), dtype=float)
        peak = np.max(np.abs(f1v))
        if peak > 0 and abs(f1v[-1]) > 1e-12 * peak:
            raise LayerAssemblyError(
                "layer source does not decay: tail value "
                f"{abs(f1v[-1]):.3e} vs peak {peak:.3e}",
                operation="q1_profile")
    phi_xi = q0_xi_derivative(mesh, branch, params)
    # running integral of f1 from xi = 0 along the mesh direction
    seg = 0.5 * (f1v[1:] + f1v[:-1]) * np.diff(mesh)
    c = np.concatenate([[0.0], np.cumsum(seg)])
    inner = c - c[-1]                        # = integral from -+infinity
    outer_integrand = inner / phi_xi
    seg2 = 0.5 * (outer_integrand[1:] + outer_integrand[:-1]) * np.diff(mesh)
    d = np.concatenate([[0.0], np.cumsum(seg2)])
    q1 = -ctx.u1 * phi_xi / phi_xi[0] + phi_xi * d
    return mesh, q1, inner


def q1_profile(xi, branch: str, ctx: Q1Context):
    """First-order layer profile Q1(xi); Q1(0) = -u1 exactly."""
    if ctx._table is None:
        ctx._table = _q1_table(branch, ctx)
    mesh, q1, _ = ctx._table
    xi = np.asarray(xi, dtype=float)
    if branch == "minus":
        out = np.interp(-xi, -mesh, q1, left=q1[0], right=0.0)
    else:
        out = np.interp(xi, mesh, q1, left=q1[0], right=0.0)
    if xi.shape == ():
        return float(out)
    return out


def q1_xi_slope_at_zero(branch: str, ctx: Q1Context) -> float:
    """dQ1/dxi at xi = 0 from the quadrature representation."""
    if ctx._table is None:
        ctx._table = _q1_table(branch, ctx)
    _, _, inner = ctx._table
    params = ctx.params
    v_star = np.asarray(params.V) + params.phi_star
    return float(ctx.u1 * np.asarray(params.alpha_z) * v_star + inner[0])
