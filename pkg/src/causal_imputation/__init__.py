"""Optimal causal imputation on structural equation models."""

__version__ = "0.1.0"

from .additive import AdditiveSemSpec, build_F, build_F_max, check_hypotheses, closed_form_G  # noqa: E402
from .core import OciProblem, SolveReport, brute_force_solve, estimate, evaluate  # noqa: E402
from .graph import Dag, validate  # noqa: E402
from .lingauss import TrellisProblem, analytic_objective, build_matrices, enumerate_solve, inner_minimize, moments  # noqa: E402
from .sem import (  # noqa: E402
    AdditiveNoise,
    Custom,
    Finite,
    ImputationPlan,
    NoiseSpec,
    Real,
    Sem,
    Table,
    exact_joint,
    expectation,
    impute,
    sample,
)
from .setfunc import (  # noqa: E402
    ConstraintOracle,
    SetFunction,
    brute_force_extremum,
    greedy_maximize,
    is_nondecreasing,
    is_submodular,
    lovasz_extension,
    minimize_single_value,
)
