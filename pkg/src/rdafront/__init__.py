"""Moving-front asymptotics for 3D reaction-diffusion-advection problems
with periodic lateral boundaries, plus a finite-difference benchmark.

The package builds composite approximations of solutions with a thin
moving internal layer: outer branches from the reduced first-order
equation (method of characteristics), the leading front surface and its
first-order correction from matching conditions, explicit layer
profiles from the phase plane of the layer ODE, and a direct explicit
benchmark solver for validation.
"""

from .assemble import AsymptoticSolution, assemble_U0, assemble_U1
from .characteristics import (
    CharacteristicPath,
    Manifold,
    QuasiLinearProblem,
    degenerate_problem,
    face_manifold,
    integrate_characteristic,
    solve_on_grid,
    transversality_jacobian,
)
from .config import RunConfig, default_config, load_config
from .errors import RdaError
from .expr import differentiate, evaluate, parse, to_text
from .fieldio import export_field, read_fld1, write_fld1
from .front import FrontEvolution, eval_H0, eval_H1, solve_h0, solve_h1
from .grid import (
    Grid3D,
    ScalarField3D,
    relative_l2_error,
    trilinear_sample,
    wrap_periodic,
)
from .layer import (
    LayerParams,
    LocalFrame,
    Q1Context,
    normal_angles,
    phase_trajectory,
    project_to_front,
    q0_profile,
    q1_profile,
)
from .outer import OuterBranch, check_lipschitz_sampling, compute_phi, \
    compute_u1, compute_W, make_branch
from .pipeline import ComparisonReport, SweepReport, run_compare, \
    run_mu_sweep
from .problem import ProblemSpec, get_problem, make_problem
from .refsolve import SolverState, make_u_init, solve, step
from .surface import FrontSurface

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
