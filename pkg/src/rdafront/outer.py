"""Outer (regular) expansion terms away from the transition layer.

The zero-order branches phi-/phi+ solve the reduced stationary equation
A u_x + B u_y - u u_z + F = 0 with the z = 0 (resp. z = a) Dirichlet
data, obtained by characteristics. On top of them this module builds

    W   = -d(phi)/dz + dF/du(phi, x, y, z),
    f1  = Lap(phi)                      (grid Laplacian),
    u1  = first-order correction, by quadrature along the linear
          characteristics dx/dz = -A/phi, dy/dz = -B/phi traced
          backward to the branch's launch face,

with u1 exactly zero on its own launch face. A sampling check estimates
the Lipschitz constants of A/phi and B/phi, which is what makes those
characteristics well-posed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .characteristics import degenerate_problem, solve_on_grid
from .errors import (
    ConditionViolatedError,
    CoverageError,
    DivisionHazardError,
    OuterError,
)
from .grid import Grid3D, ScalarField3D, trilinear_sample

DEFAULT_CHAR_STEP = 0.0025
PHI_FLOOR = 1e-6

BRANCHES = ("minus", "plus")


def _check_branch(branch):
    if branch not in BRANCHES:
        raise OuterError(f"unknown branch '{branch}'")


def field_partials(field: ScalarField3D):
    """(d/dx, d/dy, d/dz) by central differences; periodic in x and y,
    second-order one-sided at the z faces."""
    g = field.grid
    v = field.values
    dx = (np.roll(v, -1, axis=0) - np.roll(v, 1, axis=0)) / (2 * g.hx)
    dy = (np.roll(v, -1, axis=1) - np.roll(v, 1, axis=1)) / (2 * g.hy)
    dz = np.empty_like(v)
    dz[:, :, 1:-1] = (v[:, :, 2:] - v[:, :, :-2]) / (2 * g.hz)
    dz[:, :, 0] = (-3 * v[:, :, 0] + 4 * v[:, :, 1] - v[:, :, 2]) / (2 * g.hz)
    dz[:, :, -1] = (3 * v[:, :, -1] - 4 * v[:, :, -2] + v[:, :, -3]) \
        / (2 * g.hz)
    return (ScalarField3D(g, dx, time=field.time),
            ScalarField3D(g, dy, time=field.time),
            ScalarField3D(g, dz, time=field.time))


def field_laplacian(field: ScalarField3D) -> ScalarField3D:
    """Grid Laplacian; periodic in x, y; one-sided second differences at
    the z faces (second order)."""
    g = field.grid
    v = field.values
    lxx = (np.roll(v, -1, axis=0) - 2 * v + np.roll(v, 1, axis=0)) / g.hx ** 2
    lyy = (np.roll(v, -1, axis=1) - 2 * v + np.roll(v, 1, axis=1)) / g.hy ** 2
    lzz = np.empty_like(v)
    lzz[:, :, 1:-1] = (v[:, :, 2:] - 2 * v[:, :, 1:-1] + v[:, :, :-2]) \
        / g.hz ** 2
    lzz[:, :, 0] = (2 * v[:, :, 0] - 5 * v[:, :, 1] + 4 * v[:, :, 2]
                    - v[:, :, 3]) / g.hz ** 2
    lzz[:, :, -1] = (2 * v[:, :, -1] - 5 * v[:, :, -2] + 4 * v[:, :, -3]
                     - v[:, :, -4]) / g.hz ** 2
    return ScalarField3D(g, lxx + lyy + lzz, time=field.time)


@dataclass
class OuterBranch:
    """One outer branch: phi, its partials, W, and (optionally) u1."""

    branch: str
    phi: ScalarField3D
    phi_x: ScalarField3D
    phi_y: ScalarField3D
    phi_z: ScalarField3D
    W: ScalarField3D
    f1: ScalarField3D
    u1: Optional[ScalarField3D] = None

    @property
    def grid(self) -> Grid3D:
        return self.phi.grid


def compute_phi(spec, branch: str, grid: Grid3D,
                step: float = DEFAULT_CHAR_STEP, engine: str = "auto",
                fan_density=None) -> ScalarField3D:
    """Solve the reduced equation for one branch on the whole grid."""
    _check_branch(branch)
    prob = degenerate_problem(spec, branch)
    if engine == "numpy":
        field = solve_on_grid(prob, grid, fan_density=fan_density, step=step)
    else:
        from .characteristics import check_transversality
        check_transversality(prob)
        vals, _s1, _s2, _tau, res, _it, conv = \
            _kernels.solve_degenerate_grid(spec, branch, grid, step)
        n_fail = int(np.sum(~conv))
        if n_fail > 1e-3 * conv.size:
            bad = np.argwhere(~conv)[:50]
            raise CoverageError(
                f"Newton failed on {n_fail}/{conv.size} nodes",
                failed_nodes=[tuple(int(v) for v in b) for b in bad],
                operation="compute_phi")
        field = ScalarField3D(grid, vals)
    _validate_branch_sign(branch, field)
    return field


def _validate_branch_sign(branch, field):
    if branch == "minus" and field.values.max() >= 0.0:
        raise ConditionViolatedError(
            f"lower branch must stay negative (max {field.values.max():.3g})",
            operation="compute_phi")
    if branch == "plus" and field.values.min() <= 0.0:
        raise ConditionViolatedError(
            f"upper branch must stay positive (min {field.values.min():.3g})",
            operation="compute_phi")


def compute_W(spec, branch: str, phi: ScalarField3D,
              phi_z: ScalarField3D) -> ScalarField3D:
    """W = -d(phi)/dz + dF/du evaluated along the branch."""
    _check_branch(branch)
    g = phi.grid
    X, Y, Z = g.meshgrid()
    dfdu = np.broadcast_to(
        spec.dF_du.eval({"u": phi.values, "x": X, "y": Y, "z": Z}),
        phi.values.shape)
    return ScalarField3D(g, -phi_z.values + dfdu)


def make_branch(spec, branch: str, grid: Grid3D,
                step: float = DEFAULT_CHAR_STEP,
                engine: str = "auto") -> OuterBranch:
    """phi + derived fields for one branch (u1 filled in separately)."""
    phi = compute_phi(spec, branch, grid, step=step, engine=engine)
    px, py, pz = field_partials(phi)
    w = compute_W(spec, branch, phi, pz)
    f1 = field_laplacian(phi)
    return OuterBranch(branch=branch, phi=phi, phi_x=px, phi_y=py, phi_z=pz,
                       W=w, f1=f1)


def compute_u1(spec, branch: str, outer: OuterBranch,
               substeps: int = 1) -> ScalarField3D:
    """First-order outer correction by backward-characteristic quadrature.

    The launch-face boundary condition (u1 = 0 at z = 0 for the lower
    branch, z = a for the upper) holds exactly. Raises when |phi| drops
    below the safe division threshold.
    """
    _check_branch(branch)
    g = outer.grid
    phiv = outer.phi.values
    if np.abs(phiv).min() < PHI_FLOOR:
        raise DivisionHazardError(
            f"|phi| reaches {np.abs(phiv).min():.3e}; characteristic slopes "
            "A/phi, B/phi are unsafe", operation="compute_u1")
    kern = _kernels.u1_kernel(spec)
    w_over = np.ascontiguousarray(outer.W.values / phiv)
    f_over = np.ascontiguousarray(outer.f1.values / phiv)
    out = np.empty_like(phiv)
    kern(np.ascontiguousarray(phiv), w_over, f_over,
         g.xs, g.ys, g.zs, g.x0, g.hx, g.y0, g.hy, g.hz,
         branch == "minus", substeps, out)
    u1 = ScalarField3D(g, out)
    outer.u1 = u1
    return u1


@dataclass(frozen=True)
class LipschitzEstimate:
    k_a: float
    k_b: float
    suspect_a: bool
    suspect_b: bool


def check_lipschitz_sampling(spec, branch: str, outer: OuterBranch,
                             n_samples: int = 2000,
                             seed: int = 0) -> LipschitzEstimate:
    """Empirical Lipschitz constants of A/phi and B/phi from point pairs.

    Draws pairs, takes max |dG| / distance, and repeats at twice the
    sample count; an estimate still growing by more than 50% is flagged
    as suspect (unbounded-looking).
    """
    _check_branch(branch)
    g = outer.grid
    if np.abs(outer.phi.values).min() < PHI_FLOOR:
        raise ConditionViolatedError(
            "phi is not bounded away from zero",
            operation="check_lipschitz_sampling")

    def estimate(n, rng):
        p = np.stack([
            g.x0 + g.length_x * rng.random(2 * n),
            g.y0 + g.length_y * rng.random(2 * n),
            g.depth * rng.random(2 * n)], axis=-1)
        a = p[:n]
        b = p[n:]
        phi_a = trilinear_sample(outer.phi, a[:, 0], a[:, 1], a[:, 2])
        phi_b = trilinear_sample(outer.phi, b[:, 0], b[:, 1], b[:, 2])
        ga_a = spec.A.eval({"x": a[:, 0], "y": a[:, 1], "z": a[:, 2]}) / phi_a
        ga_b = spec.A.eval({"x": b[:, 0], "y": b[:, 1], "z": b[:, 2]}) / phi_b
        gb_a = spec.B.eval({"x": a[:, 0], "y": a[:, 1], "z": a[:, 2]}) / phi_a
        gb_b = spec.B.eval({"x": b[:, 0], "y": b[:, 1], "z": b[:, 2]}) / phi_b
        dist = np.sqrt(np.sum((a - b) ** 2, axis=-1))
        ok = dist > 1e-12
        ka = np.max(np.abs(np.asarray(ga_a - ga_b))[ok] / dist[ok],
                    initial=0.0)
        kb = np.max(np.abs(np.asarray(gb_a - gb_b))[ok] / dist[ok],
                    initial=0.0)
        return ka, kb

    rng = np.random.default_rng(seed)
    ka1, kb1 = estimate(n_samples, rng)
    ka2, kb2 = estimate(2 * n_samples, rng)
    return LipschitzEstimate(
        k_a=max(ka1, ka2), k_b=max(kb1, kb2),
        suspect_a=ka2 > 1.5 * ka1 + 1e-12,
        suspect_b=kb2 > 1.5 * kb1 + 1e-12)
