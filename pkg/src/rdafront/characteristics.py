"""Method-of-characteristics engine for a1 u_x + a2 u_y + a3 u_z = f.

The quasi-linear problem is reduced to the ODE system

    dx/dt = a1,  dy/dt = a2,  dz/dt = a3,  du/dt = f,

launched from a two-parameter initial manifold (x0, y0, z0, u0)(s1, s2).
Solving on a grid is a two-stage inversion: a fan of characteristics
traced from a seed grid provides initial guesses (nearest exit per
z-slice under the periodic metric), and a per-node Newton iteration on
the full three-unknown system X(s1, s2, tau) = target polishes them
against the discrete RK4 flow map, so the accuracy of the result is
controlled by the integrator step, not by the fan density.

This module is the portable numpy implementation used for tests and
small grids; production-size grids go through the generated kernels in
``_kernels`` (same algorithm, same tolerances).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import expr as ex
from .errors import (
    BlowUpError,
    CharacteristicsError,
    CoverageError,
    DegenerateCharacteristicError,
    EscapeError,
    TransversalityError,
)
from .grid import Grid3D, ScalarField3D

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-8
NEWTON_MAX_ITERS = 25
STOP_TOL = 1e-10
FAIL_FRACTION = 1e-3
JACOBIAN_FLOOR = 1e-8


@dataclass(frozen=True)
class Manifold:
    """Two-parameter initial manifold (x0, y0, z0, u0)(s1, s2).

    The callables must accept scalars or arrays. `face_z`/`u_ast` mark
    the common special case of a horizontal face z = const with x = s1,
    y = s2 and u given by an expression; the generated kernels require
    that form.
    """

    x_of: Callable
    y_of: Callable
    z_of: Callable
    u_of: Callable
    s1_range: tuple
    s2_range: tuple
    s1_periodic: bool = False
    s2_periodic: bool = False
    face_z: Optional[float] = None
    u_ast: Optional[ex.Expr] = None

    def point(self, s1, s2):
        return (np.asarray(self.x_of(s1, s2), dtype=float),
                np.asarray(self.y_of(s1, s2), dtype=float),
                np.asarray(self.z_of(s1, s2), dtype=float),
                np.asarray(self.u_of(s1, s2), dtype=float))


def face_manifold(x0, length_x, y0, length_y, z_value, u_ast) -> Manifold:
    """Horizontal-face manifold: x = s1, y = s2, z = z_value, u = u(s1, s2).

    Boundary data is evaluated at parameters wrapped into the periodic
    cell, so the manifold map is exactly periodic in (s1, s2).
    """
    zv = float(z_value)

    def wrap1(s1):
        return x0 + np.mod(np.asarray(s1, dtype=float) - x0, length_x)

    def wrap2(s2):
        return y0 + np.mod(np.asarray(s2, dtype=float) - y0, length_y)

    def u_of(s1, s2):
        w1, w2 = wrap1(s1), wrap2(s2)
        val = u_ast.eval({"x": w1, "y": w2})
        if np.ndim(s1) or np.ndim(s2):
            return np.broadcast_to(val, np.broadcast(w1, w2).shape).copy()
        return float(val)

    return Manifold(
        x_of=lambda s1, s2: wrap1(s1),
        y_of=lambda s1, s2: wrap2(s2),
        z_of=lambda s1, s2: np.full(np.shape(np.asarray(s1)), zv)
        if np.ndim(s1) else zv,
        u_of=u_of,
        s1_range=(x0, x0 + length_x),
        s2_range=(y0, y0 + length_y),
        s1_periodic=True,
        s2_periodic=True,
        face_z=zv,
        u_ast=u_ast,
    )


@dataclass(frozen=True)
class QuasiLinearProblem:
    """Coefficients (as expressions over x, y, z, u) plus the manifold.

    When periods are given, coefficients are treated as defined on the
    periodic cell anchored at (origin_x, origin_y) and evaluated at
    wrapped coordinates; coefficient formulas need only match at the
    seam, not be literally periodic functions.
    """

    a1: ex.Expr
    a2: ex.Expr
    a3: ex.Expr
    f: ex.Expr
    manifold: Manifold
    period_x: Optional[float] = None
    period_y: Optional[float] = None
    origin_x: float = 0.0
    origin_y: float = 0.0

    def rhs(self, x, y, z, u):
        xw = x if self.period_x is None else \
            self.origin_x + np.mod(np.asarray(x, dtype=float) - self.origin_x,
                                   self.period_x)
        yw = y if self.period_y is None else \
            self.origin_y + np.mod(np.asarray(y, dtype=float) - self.origin_y,
                                   self.period_y)
        b = {"x": xw, "y": yw, "z": z, "u": u, "t": 0.0}
        shape = np.broadcast(x, y, z, u).shape
        return tuple(np.broadcast_to(np.asarray(a.eval(b), dtype=float),
                                     shape)
                     for a in (self.a1, self.a2, self.a3, self.f))


def degenerate_problem(spec, branch: str) -> QuasiLinearProblem:
    """Characteristic form of the stationary reduced equation.

    The reduced equation A u_x + B u_y - u u_z + F = 0 is rewritten in
    standard form with a3 = -u and source -F, so that characteristics
    launched from z = 0 with negative boundary data climb toward
    increasing z (and those from z = a with positive data descend).
    """
    if branch == "minus":
        man = face_manifold(spec.x0, spec.length_x, spec.y0, spec.length_y,
                            0.0, spec.u0)
    elif branch == "plus":
        man = face_manifold(spec.x0, spec.length_x, spec.y0, spec.length_y,
                            spec.depth, spec.ua)
    else:
        raise CharacteristicsError(f"unknown branch '{branch}'",
                                   operation="degenerate_problem")
    return QuasiLinearProblem(
        a1=spec.A, a2=spec.B, a3=ex.neg(ex.Var("u")), f=ex.neg(spec.F),
        manifold=man, period_x=spec.length_x, period_y=spec.length_y,
        origin_x=spec.x0, origin_y=spec.y0)


@dataclass
class CharacteristicPath:
    """One integrated characteristic: parameter samples and states."""

    params: np.ndarray           # shape (n,)
    states: np.ndarray           # shape (n, 4): x, y, z, u

    @property
    def final(self):
        return tuple(self.states[-1])


def _rk4(rhs, x, y, z, u, dt):
    k1 = rhs(x, y, z, u)
    k2 = rhs(x + 0.5 * dt * k1[0], y + 0.5 * dt * k1[1],
             z + 0.5 * dt * k1[2], u + 0.5 * dt * k1[3])
    k3 = rhs(x + 0.5 * dt * k2[0], y + 0.5 * dt * k2[1],
             z + 0.5 * dt * k2[2], u + 0.5 * dt * k2[3])
    k4 = rhs(x + dt * k3[0], y + dt * k3[1], z + dt * k3[2], u + dt * k3[3])
    c = dt / 6.0
    return (x + c * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
            y + c * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
            z + c * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]),
            u + c * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3]))


def integrate_characteristic(prob: QuasiLinearProblem, s1: float, s2: float,
                             stop: Callable, step: float,
                             max_span: float = 50.0) -> CharacteristicPath:
    """Trace one characteristic until the stop function crosses zero.

    `stop(x, y, z, u)` is a signed indicator: integration ends when it
    becomes >= 0, with the crossing refined by bisection on the last
    sub-step to |stop| <= 1e-10. Raises EscapeError when the stop never
    triggers within `max_span`, BlowUpError on non-finite states.
    """
    if step <= 0:
        raise CharacteristicsError("step must be positive",
                                   operation="integrate_characteristic")
    state = tuple(float(v) for v in prob.manifold.point(s1, s2))
    params = [0.0]
    states = [state]
    tau = 0.0
    g_prev = stop(*state)
    if g_prev >= 0.0:
        return CharacteristicPath(np.array(params), np.array(states))
    while tau < max_span:
        new = _rk4(prob.rhs, *state, step)
        if not all(np.isfinite(v) for v in new):
            raise BlowUpError(
                f"state non-finite at parameter {tau + step:.6g} "
                f"(seed s1={s1:.6g}, s2={s2:.6g})",
                operation="integrate_characteristic")
        g_new = stop(*new)
        if g_new >= 0.0:
            lo, hi = 0.0, step
            base = state
            cand, g_cand = new, g_new
            for _ in range(200):
                if abs(g_cand) <= STOP_TOL or (hi - lo) < 1e-15 * step:
                    break
                mid = 0.5 * (lo + hi)
                trial = _rk4(prob.rhs, *base, mid)
                if stop(*trial) >= 0.0:
                    hi, cand = mid, trial
                else:
                    lo = mid
                cand = _rk4(prob.rhs, *base, hi)
                g_cand = stop(*cand)
            tau += hi
            params.append(tau)
            states.append(tuple(float(v) for v in cand))
            return CharacteristicPath(np.array(params), np.array(states))
        tau += step
        state = tuple(float(v) for v in new)
        params.append(tau)
        states.append(state)
        g_prev = g_new
    raise EscapeError(
        f"stop condition not reached within parameter span {max_span}",
        operation="integrate_characteristic")


def transversality_jacobian(prob: QuasiLinearProblem, s1: float, s2: float,
                            ds: float = 1e-6) -> float:
    """det of [[a1,a2,a3], [dM/ds1], [dM/ds2]] at the manifold point.

    Manifold partials use forward differences with step `ds` scaled by
    the parameter ranges.
    """
    man = prob.manifold
    x0, y0, z0, u0 = (float(v) for v in man.point(s1, s2))
    a = prob.rhs(x0, y0, z0, u0)[:3]
    d1 = ds * max(1.0, abs(man.s1_range[1] - man.s1_range[0]))
    d2 = ds * max(1.0, abs(man.s2_range[1] - man.s2_range[0]))
    p1 = [float(v) for v in man.point(s1 + d1, s2)][:3]
    p2 = [float(v) for v in man.point(s1, s2 + d2)][:3]
    row1 = [(p1[i] - (x0, y0, z0)[i]) / d1 for i in range(3)]
    row2 = [(p2[i] - (x0, y0, z0)[i]) / d2 for i in range(3)]
    mat = np.array([[a[0], a[1], a[2]], row1, row2], dtype=float)
    return float(np.linalg.det(mat))


def check_transversality(prob: QuasiLinearProblem, n: int = 8,
                         floor: float = JACOBIAN_FLOOR):
    """Sample |J| over the parameter square; raise if it nearly vanishes."""
    lo1, hi1 = prob.manifold.s1_range
    lo2, hi2 = prob.manifold.s2_range
    s1s = lo1 + (hi1 - lo1) * (np.arange(n) + 0.5) / n
    s2s = lo2 + (hi2 - lo2) * (np.arange(n) + 0.5) / n
    worst = np.inf
    for s1 in s1s:
        for s2 in s2s:
            j = abs(transversality_jacobian(prob, float(s1), float(s2)))
            worst = min(worst, j)
    if worst < floor:
        raise TransversalityError(
            f"manifold Jacobian |J| = {worst:.3e} below {floor:.0e}",
            operation="check_transversality")
    return worst


def _wrap_diff(d, period):
    if period is None:
        return d
    return d - period * np.round(d / period)


@dataclass
class GridSolveDetails:
    """Per-node Newton internals, for consistency checks."""

    s1: np.ndarray
    s2: np.ndarray
    tau: np.ndarray
    residual: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray = field(default=None)


def _flow_map(prob, s1, s2, tau, step):
    """RK4 flow from the manifold over per-node spans `tau`."""
    x, y, z, u = prob.manifold.point(s1, s2)
    tau = np.asarray(tau, dtype=float)
    n_steps = max(1, int(np.ceil(np.max(np.abs(tau)) / step)))
    dt = tau / n_steps
    for _ in range(n_steps):
        x, y, z, u = _rk4(prob.rhs, x, y, z, u, dt)
    return x, y, z, u


def _fan_trace(prob, seeds1, seeds2, step, z_lo, z_hi, max_span):
    """March the whole fan, guarding against turning characteristics."""
    x, y, z, u = prob.manifold.point(seeds1, seeds2)
    a3_0 = prob.rhs(x, y, z, u)[2]
    if np.any(np.abs(a3_0) < 1e-12):
        idx = int(np.argmin(np.abs(a3_0)))
        raise DegenerateCharacteristicError(
            f"z-speed vanishes on the manifold at seed "
            f"(s1={seeds1.ravel()[idx]:.6g}, s2={seeds2.ravel()[idx]:.6g})",
            operation="solve_on_grid")
    sign0 = np.sign(a3_0)
    n_max = int(np.ceil(max_span / step))
    traj = [np.stack([x, y, z, u], axis=-1)]
    active = np.ones(np.shape(x), dtype=bool)
    for m in range(n_max):
        x, y, z, u = _rk4(prob.rhs, x, y, z, u, step)
        if not np.all(np.isfinite(u)):
            raise BlowUpError("fan state became non-finite",
                              operation="solve_on_grid")
        a3 = prob.rhs(x, y, z, u)[2]
        turned = active & (np.sign(a3) * sign0 < 0)
        if np.any(turned):
            idx = int(np.argmax(turned.ravel()))
            raise DegenerateCharacteristicError(
                f"characteristic turned (z-speed changed sign) at seed "
                f"(s1={seeds1.ravel()[idx]:.6g}, "
                f"s2={seeds2.ravel()[idx]:.6g})",
                operation="solve_on_grid")
        traj.append(np.stack([x, y, z, u], axis=-1))
        active &= (z >= z_lo) & (z <= z_hi)
        if not np.any(active):
            break
    else:
        raise EscapeError(
            f"fan did not leave the target range within span {max_span}",
            operation="solve_on_grid")
    return np.stack(traj, axis=0)   # (n_steps+1, n_seeds, 4)


def solve_on_grid(prob: QuasiLinearProblem, targets: Grid3D,
                  fan_density=None, step: float = 0.01,
                  max_span: float = 50.0,
                  return_details: bool = False):
    """Solve the quasi-linear problem at every node of `targets`.

    Two stages per the module contract: fan tracing for initial guesses
    (nearest exit per z-slice under the periodic metric), then Newton on
    X(s1, s2, tau) = node with forward-difference Jacobians, converged
    to residual <= 1e-8 within 25 iterations. More than 0.1% failed
    nodes raises CoverageError with the node list.
    """
    check_transversality(prob)
    man = prob.manifold
    nfan1, nfan2 = fan_density if fan_density is not None \
        else (targets.nx, targets.ny)
    lo1, hi1 = man.s1_range
    lo2, hi2 = man.s2_range
    f1 = lo1 + (hi1 - lo1) * np.arange(nfan1) / nfan1 \
        if man.s1_periodic else np.linspace(lo1, hi1, nfan1)
    f2 = lo2 + (hi2 - lo2) * np.arange(nfan2) / nfan2 \
        if man.s2_periodic else np.linspace(lo2, hi2, nfan2)
    S1, S2 = np.meshgrid(f1, f2, indexing="ij")
    seeds1, seeds2 = S1.ravel(), S2.ravel()

    zs = targets.zs
    traj = _fan_trace(prob, seeds1, seeds2, step, zs.min() - 1e-9,
                      zs.max() + 1e-9, max_span)
    _warn_on_fold(traj, prob)

    xt = np.broadcast_to(targets.xs[:, None], (targets.nx, targets.ny)).ravel()
    yt = np.broadcast_to(targets.ys[None, :], (targets.nx, targets.ny)).ravel()

    values = np.empty((targets.nx * targets.ny, targets.nz))
    det = GridSolveDetails(
        s1=np.empty_like(values), s2=np.empty_like(values),
        tau=np.empty_like(values), residual=np.empty_like(values),
        converged=np.empty(values.shape, dtype=bool),
        iterations=np.empty(values.shape, dtype=np.int64))

    zpath = traj[:, :, 2]                      # (steps, seeds)
    for k, zk in enumerate(zs):
        g1, g2, gtau = _slice_guesses(traj, zpath, seeds1, seeds2, step, zk,
                                      xt, yt, prob)
        res = _newton_slice(prob, xt, yt, zk, g1, g2, gtau, step)
        values[:, k] = res[0]
        det.s1[:, k], det.s2[:, k], det.tau[:, k] = res[1], res[2], res[3]
        det.residual[:, k], det.converged[:, k] = res[4], res[5]
        det.iterations[:, k] = res[6]

    n_fail = int(np.sum(~det.converged))
    if n_fail > FAIL_FRACTION * det.converged.size:
        bad = np.argwhere(~det.converged)
        nodes = [(int(b[0]) % targets.nx, int(b[0]) // targets.nx, int(b[1]))
                 for b in bad[:50]]
        raise CoverageError(
            f"Newton failed on {n_fail}/{det.converged.size} nodes; "
            f"first failures (i, j, k): {nodes}",
            failed_nodes=nodes, operation="solve_on_grid")

    field3 = ScalarField3D(
        targets, values.reshape(targets.nx, targets.ny, targets.nz))
    if return_details:
        return field3, det
    return field3


def _warn_on_fold(traj, prob):
    """Heuristic fold detection: orientation flip of the final exit map."""
    last = traj[-1]
    n = last.shape[0]
    side = int(round(np.sqrt(n)))
    if side * side != n:
        return
    x = _wrap_diff(np.diff(last[:, 0].reshape(side, side), axis=0),
                   prob.period_x)
    y = _wrap_diff(np.diff(last[:, 1].reshape(side, side), axis=1),
                   prob.period_y)
    if x.size and y.size:
        area = x[:, :-1] * y[:-1, :]
        if np.any(area > 0) and np.any(area < 0):
            log.warning("characteristic fan shows orientation flips; "
                        "targets may have multiple preimages")


def _slice_guesses(traj, zpath, seeds1, seeds2, step, zk, xt, yt, prob):
    """Initial (s1, s2, tau) per target from the nearest fan crossing."""
    n_steps, n_seeds = zpath.shape
    before = zpath[:-1] - zk
    after = zpath[1:] - zk
    crossing = (before * after <= 0) & (np.abs(before) + np.abs(after) > 0)
    crossing_any = crossing.any(axis=0)
    first = np.argmax(crossing, axis=0)
    # seeds that never cross this slice exactly: clamp to nearest sample
    nearest = np.argmin(np.abs(zpath - zk), axis=0)
    m = np.where(crossing_any, first, np.minimum(nearest, n_steps - 2))
    z0 = zpath[m, np.arange(n_seeds)]
    z1 = zpath[m + 1, np.arange(n_seeds)]
    denom = np.where(np.abs(z1 - z0) < 1e-300, 1.0, z1 - z0)
    theta = np.clip((zk - z0) / denom, 0.0, 1.0)
    xc = traj[m, np.arange(n_seeds), 0] * (1 - theta) \
        + traj[m + 1, np.arange(n_seeds), 0] * theta
    yc = traj[m, np.arange(n_seeds), 1] * (1 - theta) \
        + traj[m + 1, np.arange(n_seeds), 1] * theta
    tauc = (m + theta) * step
    dx = _wrap_diff(xt[:, None] - xc[None, :], prob.period_x)
    dy = _wrap_diff(yt[:, None] - yc[None, :], prob.period_y)
    pick = np.argmin(dx * dx + dy * dy, axis=1)
    return seeds1[pick].copy(), seeds2[pick].copy(), tauc[pick].copy()


def _newton_slice(prob, xt, yt, zk, s1, s2, tau, step):
    n = xt.size
    target = np.stack([xt, yt, np.full(n, zk)], axis=-1)
    converged = np.zeros(n, dtype=bool)
    res_norm = np.full(n, np.inf)
    iters_used = np.zeros(n, dtype=np.int64)
    u_best = np.zeros(n)
    man = prob.manifold
    d1 = 1e-6 * max(1.0, abs(man.s1_range[1] - man.s1_range[0]))
    d2 = 1e-6 * max(1.0, abs(man.s2_range[1] - man.s2_range[0]))

    def residual(a, b, c):
        x, y, z, u = _flow_map(prob, a, b, c, step)
        r = np.stack([_wrap_diff(x - target[:, 0], prob.period_x),
                      _wrap_diff(y - target[:, 1], prob.period_y),
                      z - target[:, 2]], axis=-1)
        return r, u

    r0, u0 = residual(s1, s2, tau)
    res_norm = np.linalg.norm(r0, axis=1)
    u_best = u0
    converged = res_norm <= NEWTON_TOL
    for it in range(NEWTON_MAX_ITERS):
        active = ~converged
        if not np.any(active):
            break
        dtau = 1e-6 * np.maximum(np.abs(tau), 1e-3)
        r_s1, _ = residual(s1 + d1, s2, tau)
        r_s2, _ = residual(s1, s2 + d2, tau)
        r_tau, _ = residual(s1, s2, tau + dtau)
        jac = np.stack([(r_s1 - r0) / d1,
                        (r_s2 - r0) / d2,
                        (r_tau - r0) / dtau[:, None]], axis=-1)
        good = np.abs(np.linalg.det(jac)) > 1e-14
        upd = np.zeros((n, 3))
        if np.any(good & active):
            sel = good & active
            upd[sel] = np.linalg.solve(jac[sel], r0[sel][..., None])[..., 0]
        s1 = s1 - upd[:, 0] * active
        s2 = s2 - upd[:, 1] * active
        tau = tau - upd[:, 2] * active
        if man.s1_periodic:
            span = man.s1_range[1] - man.s1_range[0]
            s1 = man.s1_range[0] + np.mod(s1 - man.s1_range[0], span)
        if man.s2_periodic:
            span = man.s2_range[1] - man.s2_range[0]
            s2 = man.s2_range[0] + np.mod(s2 - man.s2_range[0], span)
        r0, u0 = residual(s1, s2, tau)
        res_norm = np.linalg.norm(r0, axis=1)
        newly = active & (res_norm <= NEWTON_TOL)
        iters_used[newly] = it + 1
        u_best = np.where(active, u0, u_best)
        converged |= newly
    return u_best, s1, s2, tau, res_norm, converged, iters_used
