"""Simulation and verification lab for nearest-neighbour branching random
walks and oriented bond percolation: exact count distributions, stochastic
dominance along the modulus preorder, mirror couplings, and exhaustive
bond-swap symmetry checks."""

from .errors import InvariantViolationError, ResourceCapError, UsageError
from .exact_dist import (
    ExactCaps,
    JointPmf,
    Pmf,
    ProcessParams,
    bernoulli_mix,
    convolve,
    descendant_pmf,
    dominates,
    joint_pmf_on_subset,
    pmf_equal,
    verify_monotonicity_exact,
    visited_pmf,
)
from .lattice import Bond, Point, Site, Trapezoid, build_trapezoid, is_feasible, mirror, mirror_bond, modulus_leq
from .stats_mc import EmpiricalDist, RandomStreamSpec, TestResult, chi_square_equality, dominance_check, stream

__all__ = [
    "Bond",
    "EmpiricalDist",
    "ExactCaps",
    "InvariantViolationError",
    "JointPmf",
    "Pmf",
    "Point",
    "ProcessParams",
    "RandomStreamSpec",
    "ResourceCapError",
    "Site",
    "TestResult",
    "Trapezoid",
    "UsageError",
    "bernoulli_mix",
    "build_trapezoid",
    "chi_square_equality",
    "convolve",
    "descendant_pmf",
    "dominance_check",
    "dominates",
    "is_feasible",
    "joint_pmf_on_subset",
    "mirror",
    "mirror_bond",
    "modulus_leq",
    "pmf_equal",
    "stream",
    "verify_monotonicity_exact",
    "visited_pmf",
]
