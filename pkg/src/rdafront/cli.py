"""Command-line interface.

Subcommands: degenerate, front, asymptotic, reference, compare,
sweep-mu, export. Shared flags: --config PATH, --problem NAME,
--out DIR, --mu X, --order {0,1}, --fastpath. Exit code 0 on success;
failures map to stage-coded values (see _EXIT_CODES).
"""

from __future__ import annotations

import argparse
import os
import sys

from . import fieldio
from . import front as fr
from . import outer as out
from . import refsolve as rs
from .config import RunConfig, default_config, known_problems, load_config
from .errors import (
    AssembleError,
    CharacteristicsError,
    ConfigError,
    CoreError,
    ExprError,
    FieldIOError,
    FrontError,
    LayerError,
    OuterError,
    PipelineError,
    RdaError,
    ReferenceSolverError,
)
from .pipeline import run_compare, run_mu_sweep

_EXIT_CODES = (
    (ConfigError, 2),
    (ExprError, 3),
    (CharacteristicsError, 4),
    (OuterError, 5),
    (FrontError, 6),
    (LayerError, 7),
    (AssembleError, 8),
    (ReferenceSolverError, 9),
    (PipelineError, 10),
    (FieldIOError, 11),
    (CoreError, 12),
)


def _exit_code(exc: RdaError) -> int:
    for cls, code in _EXIT_CODES:
        if isinstance(exc, cls):
            return code
    return 1


def _add_common(p):
    p.add_argument("--config", help="config file path")
    p.add_argument("--problem", choices=known_problems(),
                   help="registry problem name")
    p.add_argument("--out", help="output directory")
    p.add_argument("--mu", type=float, help="override the small parameter")
    p.add_argument("--order", type=int, choices=(0, 1),
                   help="approximation order")
    p.add_argument("--fastpath", action="store_true",
                   help="also evaluate the worked example's closed form")
    p.add_argument("--grid", help="grid as NXxNYxNZ, e.g. 64x64x257")
    p.add_argument("--times", help="space-separated output times")


def _build_config(args) -> RunConfig:
    if args.config:
        cfg = load_config(args.config, mu=args.mu, problem=args.problem)
    elif args.problem:
        cfg = default_config(args.problem)
        if args.mu is not None:
            cfg = cfg.with_mu(args.mu)
    else:
        raise ConfigError("need --config or --problem", operation="cli")
    from dataclasses import replace
    updates = {}
    if args.out:
        updates["out_dir"] = args.out
    if args.order is not None:
        updates["order"] = args.order
    if args.fastpath:
        updates["fastpath"] = True
    if args.grid:
        try:
            nx, ny, nz = (int(v) for v in args.grid.lower().split("x"))
        except ValueError:
            raise ConfigError(f"bad --grid '{args.grid}'",
                              operation="cli") from None
        updates.update(nx=nx, ny=ny, nz=nz)
    if args.times:
        updates["times"] = tuple(float(v) for v in args.times.split())
    if updates:
        cfg = replace(cfg, **updates)
    return cfg


def _export(field, cfg, name):
    os.makedirs(cfg.out_dir, exist_ok=True)
    for fmt in cfg.formats:
        ext = {"fld1": "fld", "csv": "csv", "vtk": "vtk"}[fmt]
        path = os.path.join(cfg.out_dir, f"{name}.{ext}")
        fieldio.export_field(field, fmt, path)
        print(f"wrote {path}")


def _cmd_degenerate(args):
    cfg = _build_config(args)
    grid = cfg.grid()
    for branch in ("minus", "plus"):
        phi = out.compute_phi(cfg.spec, branch, grid, step=cfg.char_step)
        _export(phi, cfg, f"phi_{branch}")
    return 0


def _cmd_front(args):
    cfg = _build_config(args)
    grid = cfg.grid()
    pm = out.compute_phi(cfg.spec, "minus", grid, step=cfg.char_step)
    pp = out.compute_phi(cfg.spec, "plus", grid, step=cfg.char_step)
    ev = fr.solve_h0(cfg.spec, pm, pp, cfg.times, dt=cfg.front_dt)
    os.makedirs(cfg.out_dir, exist_ok=True)
    for surf in ev.snapshots:
        base = os.path.join(cfg.out_dir, f"front_t{surf.time:g}")
        fieldio.write_front_csv(surf, base + ".csv")
        fieldio.write_front_fld1(surf, base + ".fld")
        print(f"wrote {base}.csv {base}.fld")
    return 0


def _cmd_asymptotic(args):
    cfg = _build_config(args)
    run_compare(cfg, write=True, export_fields=True)
    print(f"wrote assembled fields to {cfg.out_dir}")
    return 0


def _cmd_reference(args):
    cfg = _build_config(args)
    grid = cfg.grid()
    snaps = rs.solve(cfg.spec, grid, max(cfg.times), cfg.times,
                     safety=cfg.ref_safety)
    for snap in snaps:
        _export(snap, cfg, f"reference_t{snap.time:g}")
    return 0


def _cmd_compare(args):
    cfg = _build_config(args)
    report = run_compare(cfg, write=True)
    for row in report.rows:
        extra = ""
        if row.err_u1 is not None:
            extra = f"  err_u1 {row.err_u1:.4f}"
        print(f"t = {row.time:g}: relative L2 error {row.err_u0:.4f}"
              f"{extra}")
    print(f"report written to {cfg.out_dir}/report.txt")
    return 0


def _cmd_sweep_mu(args):
    cfg = _build_config(args)
    mus = [float(v) for v in args.mus.split(",")]
    report = run_mu_sweep(cfg, mus, write=True)
    for mu, err in zip(report.mus, report.errors):
        print(f"mu = {mu:g}: err {err:.4f}")
    slope = "n/a" if report.slope is None else f"{report.slope:.3f}"
    print(f"monotone decreasing: {report.monotone_decreasing}; "
          f"log-log slope: {slope}")
    return 0


def _cmd_export(args):
    field = fieldio.read_fld1(args.input)
    fieldio.export_field(field, args.format, args.output)
    print(f"wrote {args.output}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rdafront",
        description="moving-front asymptotics and benchmark comparison "
                    "for 3D reaction-diffusion-advection problems")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, doc in (
            ("degenerate", _cmd_degenerate,
             "solve the reduced-equation branches and export them"),
            ("front", _cmd_front, "evolve the leading front surface"),
            ("asymptotic", _cmd_asymptotic,
             "assemble the composite approximation and export it"),
            ("reference", _cmd_reference,
             "run the finite-difference benchmark"),
            ("compare", _cmd_compare,
             "full pipeline with error report")):
        p = sub.add_parser(name, help=doc)
        _add_common(p)
        p.set_defaults(fn=fn)

    p = sub.add_parser("sweep-mu", help="error trend across mu values")
    _add_common(p)
    p.add_argument("--mus", required=True,
                   help="comma-separated descending mu list")
    p.set_defaults(fn=_cmd_sweep_mu)

    p = sub.add_parser("export", help="convert an FLD1 file")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--format", required=True, choices=("csv", "vtk", "fld1"))
    p.set_defaults(fn=_cmd_export)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except RdaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
