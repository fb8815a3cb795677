"""Second-order time stepping for 1D subdiffusion with a time-dependent diffusion coefficient.

BDF2 convolution quadrature with a first-step correction in time, P1 Galerkin
finite elements in space, plus Mittag-Leffler based oracles and a convergence
study harness.
"""

__version__ = "0.1.0"

from .cq import CqMethod, CqWeights, generate_weights
from .experiments import (
    ConvergenceReport,
    StudySpec,
    fit_rate,
    preset_problem,
    reference_solution,
    run_study,
)
from .fem1d import (
    Coefficient,
    Mesh1D,
    PowerLaw,
    TriDiag,
    assemble_mass,
    assemble_stiffness,
    l2_norm,
    l2_project,
    load_vector,
    solve_tridiag,
)
from .oracle import duhamel_mode, exact_homogeneous, mittag_leffler
from .stepper import (
    Problem,
    Trajectory,
    run_backward_euler,
    run_corrected_bdf2,
    run_vanilla_bdf2,
)

__all__ = [
    "Coefficient",
    "ConvergenceReport",
    "CqMethod",
    "CqWeights",
    "Mesh1D",
    "PowerLaw",
    "Problem",
    "StudySpec",
    "TriDiag",
    "Trajectory",
    "assemble_mass",
    "assemble_stiffness",
    "duhamel_mode",
    "exact_homogeneous",
    "fit_rate",
    "generate_weights",
    "l2_norm",
    "l2_project",
    "load_vector",
    "mittag_leffler",
    "preset_problem",
    "reference_solution",
    "run_backward_euler",
    "run_corrected_bdf2",
    "run_study",
    "run_vanilla_bdf2",
    "solve_tridiag",
]
