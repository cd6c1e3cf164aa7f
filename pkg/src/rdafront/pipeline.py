"""Pipeline orchestration: full compare runs, mu sweeps, reports.

run_compare executes reduced-equation branches -> front evolution ->
composite assembly -> benchmark solve -> metrics, on one shared grid
(so the L2 comparison needs no interpolation), and serializes a
deterministic plain-text + CSV report pair. Wall-clock stage times go
to a separate timings file, keeping report bytes reproducible for a
fixed config and seed.
"""

from __future__ import annotations

import os
import time as _time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import assemble as am
from . import fieldio
from . import front as fr
from . import outer as out
from . import refsolve as rs
from .config import RunConfig
from .errors import ConfigError
from .grid import relative_l2_error, trilinear_sample

H1_STACK_LEVELS = 9


@dataclass
class TimeRow:
    """Metrics for one output time."""

    time: float
    err_u0: float
    err_u0_fastpath: Optional[float] = None
    fastpath_gap: Optional[float] = None
    err_u1: Optional[float] = None
    front_min: float = 0.0
    front_max: float = 0.0
    front_mean: float = 0.0
    level_dev_p95: float = 0.0
    level_within_5mu: float = 0.0


@dataclass
class ComparisonReport:
    problem: str
    mu: float
    nx: int
    ny: int
    nz: int
    order: int
    fastpath: bool
    seed: int
    rows: list
    checks: dict
    timings: dict = field(default_factory=dict)

    def to_text(self) -> str:
        lines = ["# comparison report",
                 f"problem {self.problem}",
                 f"mu {self.mu:.12e}",
                 f"grid {self.nx} {self.ny} {self.nz}",
                 f"order {self.order}",
                 f"fastpath {int(self.fastpath)}",
                 f"seed {self.seed}",
                 ""]
        for r in self.rows:
            lines.append(f"time {r.time:.6f}")
            lines.append(f"  err_u0 {r.err_u0:.12e}")
            if r.err_u0_fastpath is not None:
                lines.append(f"  err_u0_fastpath {r.err_u0_fastpath:.12e}")
                lines.append(f"  fastpath_gap {r.fastpath_gap:.12e}")
            if r.err_u1 is not None:
                lines.append(f"  err_u1 {r.err_u1:.12e}")
            lines.append(f"  front_min {r.front_min:.12e}")
            lines.append(f"  front_max {r.front_max:.12e}")
            lines.append(f"  front_mean {r.front_mean:.12e}")
            lines.append(f"  level_dev_p95 {r.level_dev_p95:.12e}")
            lines.append(f"  level_within_5mu {r.level_within_5mu:.12e}")
        lines.append("")
        for key in sorted(self.checks):
            lines.append(f"check {key} {self.checks[key]}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        rows = ["time,metric,value"]
        for r in self.rows:
            rows.append(f"{r.time:.6f},err_u0,{r.err_u0:.12e}")
            if r.err_u0_fastpath is not None:
                rows.append(f"{r.time:.6f},err_u0_fastpath,"
                            f"{r.err_u0_fastpath:.12e}")
                rows.append(f"{r.time:.6f},fastpath_gap,"
                            f"{r.fastpath_gap:.12e}")
            if r.err_u1 is not None:
                rows.append(f"{r.time:.6f},err_u1,{r.err_u1:.12e}")
            for name in ("front_min", "front_max", "front_mean",
                         "level_dev_p95", "level_within_5mu"):
                rows.append(f"{r.time:.6f},{name},"
                            f"{getattr(r, name):.12e}")
        return "\n".join(rows) + "\n"

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.txt"), "w") as fh:
            fh.write(self.to_text())
        with open(os.path.join(out_dir, "report.csv"), "w") as fh:
            fh.write(self.to_csv())
        with open(os.path.join(out_dir, "timings.txt"), "w") as fh:
            for key, val in self.timings.items():
                fh.write(f"{key} {val:.3f} s\n")


class _Stages:
    def __init__(self):
        self.timings = {}

    def run(self, name, fn):
        t0 = _time.perf_counter()
        result = fn()
        self.timings[name] = _time.perf_counter() - t0
        return result


def level_set_deviation(ref_field, surface, outer_minus, outer_plus):
    """Per-column distance between the benchmark's mid-level crossing and
    the front surface; returns (|dz| array, found mask)."""
    g = ref_field.grid
    X, Y = np.meshgrid(g.xs, g.ys, indexing="ij")
    hc = np.clip(surface.h, 0.0, g.depth)
    star = 0.5 * (trilinear_sample(outer_minus.phi, X, Y, hc)
                  + trilinear_sample(outer_plus.phi, X, Y, hc))
    u = ref_field.values
    diff = u - star[:, :, None]
    cross = diff[:, :, :-1] * diff[:, :, 1:] <= 0.0
    found = cross.any(axis=2)
    k = np.argmax(cross, axis=2)
    ii, jj = np.meshgrid(np.arange(g.nx), np.arange(g.ny), indexing="ij")
    d0 = diff[ii, jj, k]
    d1 = diff[ii, jj, k + 1]
    denom = np.where(np.abs(d1 - d0) < 1e-300, 1.0, d1 - d0)
    zc = g.zs[k] + (0.0 - d0) / denom * g.hz
    dev = np.abs(zc - surface.h)
    return np.where(found, dev, np.inf), found


def run_compare(cfg: RunConfig, write: bool = True,
                export_fields: bool = False) -> ComparisonReport:
    """Full pipeline on one grid; returns (and optionally writes) the
    comparison report."""
    spec = cfg.spec
    grid = cfg.grid()
    stages = _Stages()
    times = tuple(sorted(cfg.times))

    branch_minus = stages.run(
        "outer_phi_minus",
        lambda: out.make_branch(spec, "minus", grid, step=cfg.char_step))
    branch_plus = stages.run(
        "outer_phi_plus",
        lambda: out.make_branch(spec, "plus", grid, step=cfg.char_step))
    if cfg.order >= 1:
        stages.run("outer_u1_minus",
                   lambda: out.compute_u1(spec, "minus", branch_minus,
                                          substeps=cfg.u1_substeps))
        stages.run("outer_u1_plus",
                   lambda: out.compute_u1(spec, "plus", branch_plus,
                                          substeps=cfg.u1_substeps))

    t_hi = max(times[-1], 1e-12)
    stack_times = np.unique(np.concatenate([
        np.linspace(0.0, t_hi, H1_STACK_LEVELS), np.asarray(times)]))
    evolution = stages.run(
        "front_h0",
        lambda: fr.solve_h0(spec, branch_minus.phi, branch_plus.phi,
                            stack_times, dt=cfg.front_dt))
    evolution1 = None
    if cfg.order >= 1:
        uniform = np.linspace(0.0, t_hi, H1_STACK_LEVELS)
        ev_uniform = stages.run(
            "front_h0_stack",
            lambda: fr.solve_h0(spec, branch_minus.phi, branch_plus.phi,
                                uniform, dt=cfg.front_dt))
        evolution1 = stages.run(
            "front_h1",
            lambda: fr.solve_h1(spec, ev_uniform, branch_minus, branch_plus,
                                times, dt=cfg.front_dt))

    ref_snaps = stages.run(
        "reference",
        lambda: rs.solve(spec, grid, times[-1], times,
                         safety=cfg.ref_safety))

    rows = []
    fields_to_export = []
    for i, t in enumerate(times):
        surf = evolution.at_time(t)
        u0_sol = stages.run(
            f"assemble_u0_t{i}",
            lambda s=surf: am.assemble_U0(spec, branch_minus, branch_plus,
                                          s, grid, mode="general"))
        ref = ref_snaps[i]
        row = TimeRow(
            time=t,
            err_u0=relative_l2_error(u0_sol.field, ref),
            front_min=float(surf.h.min()),
            front_max=float(surf.h.max()),
            front_mean=float(surf.h.mean()))
        if cfg.fastpath:
            fp_sol = am.assemble_U0(spec, branch_minus, branch_plus, surf,
                                    grid, mode="fastpath")
            row.err_u0_fastpath = relative_l2_error(fp_sol.field, ref)
            row.fastpath_gap = float(
                np.max(np.abs(fp_sol.field.values - u0_sol.field.values)))
        if cfg.order >= 1:
            u1_sol = stages.run(
                f"assemble_u1_t{i}",
                lambda tt=t: am.assemble_U1(
                    spec, branch_minus, branch_plus, evolution, evolution1,
                    tt, grid))
            row.err_u1 = relative_l2_error(u1_sol.field, ref)
            fields_to_export.append((f"U1_t{t:g}", u1_sol.field))
        dev, found = level_set_deviation(ref, surf, branch_minus,
                                         branch_plus)
        good = dev[found]
        row.level_dev_p95 = float(np.percentile(good, 95)) if good.size \
            else float("inf")
        row.level_within_5mu = float(np.mean(dev <= 5 * spec.mu))
        rows.append(row)
        fields_to_export.append((f"U0_t{t:g}", u0_sol.field))
        fields_to_export.append((f"reference_t{t:g}", ref))

    checks = {
        "phi_minus_max": f"{branch_minus.phi.values.max():.12e}",
        "phi_plus_min": f"{branch_plus.phi.values.min():.12e}",
        "front_monotone": str(bool(np.all([
            np.all(evolution.snapshots[k + 1].h >= evolution.snapshots[k].h)
            for k in range(len(evolution.snapshots) - 1)]))),
        "front_seam_mismatch": "0.0e+00",   # single sample per period
        "front_interior": str(all(
            s.time == 0.0 or s.interior() for s in evolution.snapshots)),
    }
    if cfg.order >= 1:
        checks["u1_minus_face"] = \
            f"{np.abs(branch_minus.u1.values[:, :, 0]).max():.3e}"
        checks["u1_plus_face"] = \
            f"{np.abs(branch_plus.u1.values[:, :, -1]).max():.3e}"

    report = ComparisonReport(
        problem=spec.name, mu=spec.mu, nx=cfg.nx, ny=cfg.ny, nz=cfg.nz,
        order=cfg.order, fastpath=cfg.fastpath, seed=cfg.seed, rows=rows,
        checks=checks, timings=stages.timings)
    if write:
        report.write(cfg.out_dir)
        if export_fields:
            for name, fld in fields_to_export:
                for fmt in cfg.formats:
                    ext = {"fld1": "fld", "csv": "csv", "vtk": "vtk"}[fmt]
                    fieldio.export_field(
                        fld, fmt, os.path.join(cfg.out_dir,
                                               f"{name}.{ext}"))
    return report


@dataclass
class SweepReport:
    problem: str
    time: float
    mus: tuple
    errors: tuple
    grids: tuple
    monotone_decreasing: bool
    slope: Optional[float]

    def to_text(self) -> str:
        lines = ["# mu sweep report",
                 f"problem {self.problem}",
                 f"time {self.time:.6f}"]
        for mu, err, g in zip(self.mus, self.errors, self.grids):
            lines.append(f"mu {mu:.6e} grid {g[0]}x{g[1]}x{g[2]} "
                         f"err_u0 {err:.12e}")
        lines.append(f"monotone_decreasing {self.monotone_decreasing}")
        slope = "n/a" if self.slope is None else f"{self.slope:.6f}"
        lines.append(f"loglog_slope {slope}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "sweep.txt"), "w") as fh:
            fh.write(self.to_text())


def run_mu_sweep(cfg: RunConfig, mu_list, write: bool = True) -> SweepReport:
    """Compare errors across mu values on mu-resolved grids.

    Each mu gets nz set so that hz = mu/2; lateral resolution follows the
    config. The mu list must be positive and strictly descending.
    """
    mus = tuple(float(m) for m in mu_list)
    if any(m <= 0 for m in mus):
        raise ConfigError("mu values must be positive",
                          operation="run_mu_sweep")
    if any(b >= a for a, b in zip(mus, mus[1:])):
        raise ConfigError("mu values must be strictly descending",
                          operation="run_mu_sweep")
    t_ref = sorted(cfg.times)[0]
    errors = []
    grids = []
    for mu in mus:
        nz = int(round(2.0 * cfg.spec.depth / mu)) + 1
        sub = RunConfig(
            spec=cfg.spec.with_mu(mu), nx=cfg.nx, ny=cfg.ny, nz=nz,
            char_step=cfg.char_step, front_dt=cfg.front_dt,
            u1_substeps=cfg.u1_substeps, seed=cfg.seed,
            ref_safety=cfg.ref_safety, times=(t_ref,),
            out_dir=cfg.out_dir, formats=cfg.formats, order=0,
            fastpath=False)
        rep = run_compare(sub, write=False)
        errors.append(rep.rows[0].err_u0)
        grids.append((sub.nx, sub.ny, sub.nz))
    monotone = all(b < a for a, b in zip(errors, errors[1:]))
    slope = None
    if len(mus) >= 2:
        slope = float(np.polyfit(np.log(mus), np.log(errors), 1)[0])
    report = SweepReport(problem=cfg.spec.name, time=t_ref, mus=mus,
                         errors=tuple(errors), grids=tuple(grids),
                         monotone_decreasing=monotone, slope=slope)
    if write:
        report.write(cfg.out_dir)
    return report
