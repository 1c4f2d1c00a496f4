"""Solver and verifier for distributional fixed-point equations ``X = sum_{i<=N} T_i X_i``."""

__version__ = "0.1.0"

from .conditions import ConditionReport, Kind, ProblemSpec, check_conditions, solve_liu_alpha
from .measures import (
    CountLaw,
    DiscreteMeasure,
    MomentPair,
    count_stats,
    eckberg_two_atom,
    length_biased,
    merge_atoms,
    mk_discrete,
    moment,
    weighted_sum_law,
)
from .simulate import McReport, mc_estimate, sample_once, sample_positive_stable
from .solver import MomentReport, SolveResult, closed_form_moments, picard_step, solve
from .transforms import (
    LstCurve,
    eckberg_bound,
    equilibrium_lst,
    lst_eval,
    pgf_eval,
    stable_map,
)

__all__ = [
    "ConditionReport", "CountLaw", "DiscreteMeasure", "Kind", "LstCurve", "McReport",
    "MomentPair", "MomentReport", "ProblemSpec", "SolveResult", "check_conditions",
    "closed_form_moments", "count_stats", "eckberg_bound", "eckberg_two_atom",
    "equilibrium_lst", "length_biased", "lst_eval", "mc_estimate", "merge_atoms",
    "mk_discrete", "moment", "pgf_eval", "picard_step", "sample_once",
    "sample_positive_stable", "solve", "solve_liu_alpha", "stable_map", "weighted_sum_law",
]
