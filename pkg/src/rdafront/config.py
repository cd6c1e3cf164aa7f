"""Run configuration: sectioned key-value files and defaults.

Config files are INI-style text with four sections::

    [problem]
    name = paper-example          ; registry name, or inline expressions:
    ; A = "sin(pi*x)"  B = "..."  F = "..."  u0 = "-6"  ua = "4"
    ; h_init = "0"  L = 2  M = 2  a = 1  T = 0.85  mu = 0.01  x0 = -1  y0 = -1

    [grid]
    nx = 64
    ny = 64
    nz = 257

    [numerics]
    char_step = 0.0025            ; RK4 parameter step for characteristics
    front_dt = 0.0025             ; RK4 time step for front tracing
    u1_substeps = 1               ; path substeps per z-interval in u1
    seed = 0                      ; RNG seed for sampling checks

    [output]
    times = 0.2 0.6
    dir = out
    formats = fld1 csv
    order = 0                     ; 0 or 1
    fastpath = false

Expression values may be quoted. Unknown keys are rejected with the key
name; malformed files are rejected with a line number.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from typing import Optional

from .errors import ConfigError
from .problem import REGISTRY, ProblemSpec, get_problem, make_problem

_GRID_KEYS = {"nx", "ny", "nz"}
_NUMERICS_KEYS = {"char_step", "front_dt", "u1_substeps", "seed",
                  "ref_safety"}
_OUTPUT_KEYS = {"times", "dir", "formats", "order", "fastpath"}
_PROBLEM_KEYS = {"name", "mu", "A", "B", "F", "u0", "ua", "h_init",
                 "L", "M", "a", "T", "x0", "y0"}

MIN_RESOLUTION = 8


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration."""

    spec: ProblemSpec
    nx: int = 64
    ny: int = 64
    nz: int = 257
    char_step: float = 0.0025
    front_dt: float = 0.0025
    u1_substeps: int = 1
    seed: int = 0
    ref_safety: float = 0.4
    times: tuple = (0.2, 0.6)
    out_dir: str = "out"
    formats: tuple = ("fld1",)
    order: int = 0
    fastpath: bool = False

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < MIN_RESOLUTION:
            raise ConfigError(
                f"resolutions must be >= {MIN_RESOLUTION} per axis, got "
                f"{self.nx}x{self.ny}x{self.nz}", operation="RunConfig")
        if self.order not in (0, 1):
            raise ConfigError(f"order must be 0 or 1, got {self.order}",
                              operation="RunConfig")
        if not self.times:
            raise ConfigError("at least one output time required",
                              operation="RunConfig")
        for t in self.times:
            if t < 0 or t > self.spec.horizon + 1e-12:
                raise ConfigError(
                    f"output time {t} outside [0, {self.spec.horizon}]",
                    operation="RunConfig")
        bad = [f for f in self.formats if f not in ("fld1", "csv", "vtk")]
        if bad:
            raise ConfigError(f"unknown export formats {bad}",
                              operation="RunConfig")

    def grid(self):
        return self.spec.make_grid(self.nx, self.ny, self.nz)

    def with_mu(self, mu: float) -> "RunConfig":
        return replace(self, spec=self.spec.with_mu(mu))


def default_config(problem: str = "paper-example", **overrides) -> RunConfig:
    return RunConfig(spec=get_problem(problem), **overrides)


def _unquote(v: str) -> str:
    v = v.strip()
    if len(v) >= 2 and v[0] == v[-1] and v[0] in "'\"":
        return v[1:-1]
    return v


def _check_keys(parser, section, allowed):
    for key in parser[section]:
        if key not in allowed:
            raise ConfigError(
                f"unknown key '{key}' in section [{section}] "
                f"(allowed: {sorted(allowed)})", operation="load_config")


def load_config(path, mu: Optional[float] = None,
                problem: Optional[str] = None) -> RunConfig:
    """Parse a config file; optional mu/problem overrides win."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh, source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read '{path}': {exc}",
                          operation="load_config") from None
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", "?")
        raise ConfigError(f"parse error in '{path}' (line {lineno}): "
                          f"{exc.message.splitlines()[0]}",
                          operation="load_config") from None

    if not parser.has_section("problem") and problem is None:
        raise ConfigError("missing required section [problem]",
                          operation="load_config")

    spec = None
    if problem is not None:
        spec = get_problem(problem)
    elif parser.has_section("problem"):
        _check_keys(parser, "problem", _PROBLEM_KEYS)
        sec = parser["problem"]
        if "name" in sec:
            spec = get_problem(_unquote(sec["name"]))
            if "mu" in sec:
                spec = spec.with_mu(float(sec["mu"]))
        else:
            required = {"A", "B", "F", "u0", "ua", "h_init",
                        "L", "M", "a", "T", "mu"}
            missing = required - set(sec)
            if missing:
                raise ConfigError(
                    f"[problem] needs 'name' or the full inline set; "
                    f"missing {sorted(missing)}", operation="load_config")
            spec = make_problem(
                "inline",
                A=_unquote(sec["A"]), B=_unquote(sec["B"]),
                F=_unquote(sec["F"]), u0=_unquote(sec["u0"]),
                ua=_unquote(sec["ua"]), h_init=_unquote(sec["h_init"]),
                length_x=float(sec["L"]), length_y=float(sec["M"]),
                depth=float(sec["a"]), horizon=float(sec["T"]),
                mu=float(sec["mu"]),
                x0=float(sec.get("x0", "0")), y0=float(sec.get("y0", "0")))
    if mu is not None:
        spec = spec.with_mu(mu)

    kwargs = {}
    if parser.has_section("grid"):
        _check_keys(parser, "grid", _GRID_KEYS)
        for key in parser["grid"]:
            kwargs[key] = int(parser["grid"][key])
    if parser.has_section("numerics"):
        _check_keys(parser, "numerics", _NUMERICS_KEYS)
        sec = parser["numerics"]
        if "char_step" in sec:
            kwargs["char_step"] = float(sec["char_step"])
        if "front_dt" in sec:
            kwargs["front_dt"] = float(sec["front_dt"])
        if "u1_substeps" in sec:
            kwargs["u1_substeps"] = int(sec["u1_substeps"])
        if "seed" in sec:
            kwargs["seed"] = int(sec["seed"])
        if "ref_safety" in sec:
            kwargs["ref_safety"] = float(sec["ref_safety"])
    if parser.has_section("output"):
        _check_keys(parser, "output", _OUTPUT_KEYS)
        sec = parser["output"]
        if "times" in sec:
            kwargs["times"] = tuple(float(v) for v in sec["times"].split())
        if "dir" in sec:
            kwargs["out_dir"] = _unquote(sec["dir"])
        if "formats" in sec:
            kwargs["formats"] = tuple(sec["formats"].split())
        if "order" in sec:
            kwargs["order"] = int(sec["order"])
        if "fastpath" in sec:
            kwargs["fastpath"] = sec.getboolean("fastpath")
    unknown = set(parser.sections()) - {"problem", "grid", "numerics",
                                        "output"}
    if unknown:
        raise ConfigError(f"unknown sections {sorted(unknown)}",
                          operation="load_config")
    try:
        return RunConfig(spec=spec, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value: {exc}",
                          operation="load_config") from None


def known_problems():
    return sorted(REGISTRY)
