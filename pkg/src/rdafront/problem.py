"""Problem definitions: coefficient expressions, box geometry, registry.

A ProblemSpec bundles the coefficient expressions of the governing
equation

    mu * Lap(u) - u_t = A(x,y,z) u_x + B(x,y,z) u_y - u u_z + F(u,x,y,z)

with Dirichlet data u(z=0) = u0(x,y), u(z=a) = ua(x,y), periodic lateral
boundaries with periods (L, M), the initial front position h_init(x,y),
the time horizon T and the small diffusion parameter mu. The
representative periodic cell is [x0, x0+L] x [y0, y0+M].

The boundary data must satisfy u0 < 0 < ua on the whole cell: the lower
outer branch is negative and the upper one positive, which is what makes
the internal transition layer possible in the first place.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import expr as ex
from .errors import ConfigError
from .grid import Grid3D


def _check_vars(name, ast, allowed):
    extra = ast.variables() - set(allowed)
    if extra:
        raise ConfigError(
            f"expression '{name}' uses variables {sorted(extra)} outside "
            f"{sorted(allowed)}", operation="ProblemSpec")


@dataclass(frozen=True)
class ProblemSpec:
    """Immutable problem definition; all expressions pre-parsed."""

    name: str
    A: ex.Expr
    B: ex.Expr
    F: ex.Expr
    u0: ex.Expr
    ua: ex.Expr
    h_init: ex.Expr
    length_x: float
    length_y: float
    depth: float
    horizon: float
    mu: float
    x0: float = 0.0
    y0: float = 0.0
    sign_samples: int = field(default=16, compare=False)

    def __post_init__(self):
        if self.mu <= 0:
            raise ConfigError(f"mu must be positive, got {self.mu}",
                              operation="ProblemSpec")
        for key in ("length_x", "length_y", "depth", "horizon"):
            if getattr(self, key) <= 0:
                raise ConfigError(f"{key} must be positive",
                                  operation="ProblemSpec")
        _check_vars("A", self.A, ("x", "y", "z"))
        _check_vars("B", self.B, ("x", "y", "z"))
        _check_vars("F", self.F, ("u", "x", "y", "z"))
        for nm in ("u0", "ua", "h_init"):
            _check_vars(nm, getattr(self, nm), ("x", "y"))
        self._check_boundary_signs()

    def _check_boundary_signs(self):
        n = self.sign_samples
        xs = self.x0 + self.length_x * (np.arange(n) + 0.5) / n
        ys = self.y0 + self.length_y * (np.arange(n) + 0.5) / n
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        lo = np.broadcast_to(self.u0.eval({"x": X, "y": Y}), X.shape)
        hi = np.broadcast_to(self.ua.eval({"x": X, "y": Y}), X.shape)
        if not (np.all(lo < 0.0) and np.all(hi > 0.0)):
            raise ConfigError(
                "boundary data must satisfy u0 < 0 < ua over the period "
                f"cell (got u0 in [{lo.min():.3g}, {lo.max():.3g}], "
                f"ua in [{hi.min():.3g}, {hi.max():.3g}])",
                operation="ProblemSpec")
        h0 = np.broadcast_to(self.h_init.eval({"x": X, "y": Y}), X.shape)
        if np.any(h0 < 0.0) or np.any(h0 > self.depth):
            raise ConfigError("h_init must lie within [0, depth]",
                              operation="ProblemSpec")

    def with_mu(self, mu: float) -> "ProblemSpec":
        return replace(self, mu=float(mu))

    def make_grid(self, nx: int, ny: int, nz: int) -> Grid3D:
        return Grid3D(nx, ny, nz, self.x0, self.length_x,
                      self.y0, self.length_y, self.depth)

    @property
    def dF_du(self) -> ex.Expr:
        return self.F.diff("u")

    def expression_registry(self):
        """Named coefficient expressions, for sampling-based checks."""
        return {"A": self.A, "B": self.B, "F": self.F, "u0": self.u0,
                "ua": self.ua, "h_init": self.h_init}


def make_problem(name, *, A, B, F, u0, ua, h_init, length_x, length_y,
                 depth, horizon, mu, x0=0.0, y0=0.0):
    """Build a ProblemSpec from expression strings."""
    p = ex.parse
    return ProblemSpec(
        name=name, A=p(A), B=p(B), F=p(F), u0=p(u0), ua=p(ua),
        h_init=p(h_init), length_x=float(length_x), length_y=float(length_y),
        depth=float(depth), horizon=float(horizon), mu=float(mu),
        x0=float(x0), y0=float(y0))


def _paper_example():
    return make_problem(
        "paper-example",
        A="sin(pi*x)",
        B="cos(pi*x/4)",
        F="-cos(pi*x/4)*cos(pi*y/4)*cos(pi*z/4)",
        u0="-6", ua="4", h_init="0",
        length_x=2.0, length_y=2.0, depth=1.0, horizon=0.85, mu=0.01,
        x0=-1.0, y0=-1.0)


def _uniform_front():
    # constant branches phi- = -6, phi+ = 4; front speed exactly 1
    return make_problem(
        "uniform-front",
        A="0", B="0", F="0",
        u0="-6", ua="4", h_init="0.2",
        length_x=2.0, length_y=2.0, depth=1.0, horizon=0.5, mu=0.01,
        x0=-1.0, y0=-1.0)


def _separable_source():
    # phi- = -sqrt(36+2z), phi+ = sqrt(14+2z); closed forms for tests
    return make_problem(
        "separable-source",
        A="0", B="0", F="1",
        u0="-6", ua="4", h_init="0.3",
        length_x=2.0, length_y=2.0, depth=1.0, horizon=0.3, mu=0.01,
        x0=-1.0, y0=-1.0)


REGISTRY = {
    "paper-example": _paper_example,
    "uniform-front": _uniform_front,
    "separable-source": _separable_source,
}


def get_problem(name: str) -> ProblemSpec:
    try:
        builder = REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(REGISTRY))
        raise ConfigError(f"unknown problem '{name}' (known: {known})",
                          operation="get_problem") from None
    return builder()
