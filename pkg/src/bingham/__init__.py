"""Mixed finite elements for viscoplastic (Bingham) flow in a pipe cross-section.

The package solves the velocity/multiplier saddle point problem

    (mu grad(u), grad(v)) + (g grad(v), L)  = (f, v)
    (g grad(u), M - L)                     <= 0,   |M| <= 1 a.e.

with a projected Uzawa iteration on conforming triangulations, computes
errors against the closed-form circular-pipe solution and drives adaptive
red-green-blue mesh refinement from residual a posteriori estimators.
"""

from .mesh import (
    Mesh,
    MeshError,
    generate_square,
    generate_circle,
    uniform_refine,
    rgb_refine,
    laplacian_smooth,
    validate_mesh,
    locate_points,
    read_mesh_text,
    write_mesh_text,
)
from .spaces import (
    ElementFamily,
    FeSpace,
    QuadratureRule,
    build_space,
    eval_basis,
    family,
    triangle_rule,
)
from .assembly import (
    ScalarField,
    VectorField,
    apply_dirichlet,
    assemble_coupling,
    assemble_load,
    assemble_multiplier_mass,
    assemble_stiffness,
    interpolate,
    interpolate_vector,
    project_gradient,
)
from .linalg import CgConfig, CgResult, IterationLimitError, cg_solve
from .solver import (
    BinghamParams,
    UzawaConvergenceError,
    UzawaResult,
    project_ball,
    uzawa_solve,
)
from .analysis import (
    CircleExact,
    EstimatorReport,
    estimate,
    exact_div_lambda,
    exact_lambda,
    exact_velocity,
    exact_velocity_gradient,
    h1_error,
    mark,
    multiplier_error,
)
from .cli import ExperimentConfig, fit_rate, run_experiment

__version__ = "0.1.0"
