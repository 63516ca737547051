"""Simulated quantum annealing with a non-stoquastic +XX catalyst.

Path-integral Monte Carlo for transverse-field Ising models carrying an
antiferromagnetic transverse two-spin term, its sign-free Trotterization,
convergence-schedule checks, and exact small-system verification.
"""

from .model import AnnealParams, IsingProblem, ProblemError, SpinPath, build_problem
from .schedule import AnnealBase, SchedulePolicy, standard_policy, validate
from .trotter import NonStoquasticError, TrotterCoefficients, coefficients, pair_kernel, sign_free

__all__ = [
    "AnnealBase",
    "AnnealParams",
    "IsingProblem",
    "NonStoquasticError",
    "ProblemError",
    "SchedulePolicy",
    "SpinPath",
    "TrotterCoefficients",
    "build_problem",
    "coefficients",
    "pair_kernel",
    "standard_policy",
    "sign_free",
    "validate",
]

__version__ = "0.1.0"
