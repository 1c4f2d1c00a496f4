"""Problem definitions and the moment conditions that decide solvability.

Five equation kinds are supported, written in terms of the LST ``F`` of the
unknown ``X``, the pgf ``P`` of ``N`` and ``phi(s) = E[F(T s)]``:

==========================  ===========================================
``homogeneous``             ``F(s) = P(phi(s))``
``floored`` (``m >= 1``)    ``F(s) = phi(s)**m P(phi(s))``
``nonhomogeneous``          ``F(s) = F_B(s) P(phi(s))``
``common_t``                ``F(s) = E[P(F(T s))]``
``nonhomogeneous_common_t`` ``F(s) = F_B(s) E[P(F(T s))]``
==========================  ===========================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import SpecInvalid
from .measures import (
    CountLaw,
    CountStats,
    DiscreteMeasure,
    count_stats,
    mean_t_log_t,
    moment,
)

EQ_TOL = 1e-9
LIU_BISECTION_STEPS = 200


class Kind(str, Enum):
    HOMOGENEOUS = "homogeneous"
    FLOORED = "floored"
    NONHOMOGENEOUS = "nonhomogeneous"
    COMMON_T = "common_t"
    NONHOMOGENEOUS_COMMON_T = "nonhomogeneous_common_t"

    @property
    def nonhomogeneous(self) -> bool:
        return self in (Kind.NONHOMOGENEOUS, Kind.NONHOMOGENEOUS_COMMON_T)

    @property
    def common_t(self) -> bool:
        return self in (Kind.COMMON_T, Kind.NONHOMOGENEOUS_COMMON_T)


@dataclass(frozen=True)
class ProblemSpec:
    """One equation instance.

    For nonhomogeneous kinds ``mu`` may be left as ``None``: the mean is then
    determined by the laws.  If it is given it becomes one more clause to check.
    """

    kind: Kind
    n: CountLaw
    t: DiscreteMeasure
    mu: Optional[float] = 1.0
    b: Optional[DiscreteMeasure] = None
    m: int = 0

    def __post_init__(self):
        try:
            kind = Kind(self.kind)
        except ValueError:
            raise SpecInvalid(f"unknown equation kind {self.kind!r}") from None
        object.__setattr__(self, "kind", kind)
        if kind.nonhomogeneous and self.b is None:
            raise SpecInvalid(f"{kind.value} equation needs a law for B")
        if not kind.nonhomogeneous and self.b is not None:
            raise SpecInvalid(f"{kind.value} equation takes no B")
        if kind is Kind.FLOORED:
            if int(self.m) != self.m or self.m < 1:
                raise SpecInvalid("floored equation needs an integer m >= 1")
        elif self.m:
            raise SpecInvalid("m is only meaningful for the floored equation")
        if self.mu is None:
            if not kind.nonhomogeneous:
                raise SpecInvalid("homogeneous kinds need a target mean mu")
        elif not (self.mu > 0) or not math.isfinite(self.mu):
            raise SpecInvalid("mu must be a positive finite number")

    @property
    def shift(self) -> int:
        """Number of fixed summands in front of the random sum."""
        return int(self.m) if self.kind is Kind.FLOORED else 0

    def count_stats(self) -> CountStats:
        """Statistics of the total number of summands ``N + m``."""
        return count_stats(self.n).shifted(self.shift)

    def target_mean(self) -> float:
        if not self.kind.nonhomogeneous:
            return float(self.mu)
        en = count_stats(self.n).mean
        return self.b.mean / (1.0 - en * self.t.mean)


@dataclass
class ConditionReport:
    kind: Kind
    satisfied: bool
    scalars: dict
    failures: list
    clauses: dict
    liu_alpha: Optional[float]
    liu4: bool
    liu5: bool
    prop1: bool
    uniqueness_certified: bool
    verdict: str = field(default="")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "satisfied": self.satisfied,
            "verdict": self.verdict,
            "failures": list(self.failures),
            "clauses": dict(self.clauses),
            "scalars": dict(self.scalars),
            "liu_alpha": self.liu_alpha,
            "liu4": self.liu4,
            "liu5": self.liu5,
            "prop1": self.prop1,
            "uniqueness_certified": self.uniqueness_certified,
        }


def _phi(mean_count: float, t: DiscreteMeasure, alpha: float) -> float:
    if alpha == 0:
        return mean_count * t.prob_positive()
    return mean_count * moment(t, alpha)


def solve_liu_alpha(n: CountLaw, t: DiscreteMeasure, m: int = 0, tol: float = 1e-12) -> Optional[float]:
    """Root in (0, 1] of ``E[N+m] E[T**alpha] = 1``, or ``None``.

    The root is located by bisection after checking for a sign change between
    ``alpha -> 0+`` (where the left side is ``E[N+m] Pr(T > 0)``) and
    ``alpha = 1``.  A value within ``tol`` of 1 at ``alpha = 1`` counts as a root.
    """
    en = count_stats(n).mean + m
    if en <= 0 or t.prob_positive() == 0:
        return None
    f1 = _phi(en, t, 1.0) - 1.0
    if abs(f1) <= tol:
        return 1.0
    f0 = _phi(en, t, 0.0) - 1.0
    if f0 == 0 or f0 * f1 > 0:
        return None
    lo, hi = 0.0, 1.0
    for _ in range(LIU_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        fm = _phi(en, t, mid) - 1.0
        if fm == 0:
            return mid
        if (fm > 0) == (f0 > 0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _shifted_n_log_plus(n: CountLaw, m: int) -> float:
    ks, ps = n.pmf_table()
    ks = ks.astype(np.float64) + m
    return math.fsum(ps * np.where(ks > 1, ks * np.log(np.maximum(ks, 1.0)), 0.0))


def check_conditions(p: ProblemSpec, tol_eq: float = EQ_TOL) -> ConditionReport:
    """Evaluate the kind-matched condition set for ``p``.

    Equalities are tested with absolute tolerance ``tol_eq``; strict
    inequalities are tested exactly.
    """
    ns = count_stats(p.n)
    a = p.count_stats()
    et = p.t.mean
    et2 = p.t.second_moment
    vt = p.t.variance
    ptpos = p.t.prob_positive()
    tlogt = mean_t_log_t(p.t)
    scalars = {
        "E[N]": ns.mean,
        "Var(N)": ns.variance,
        "E[N^2]": ns.second_moment,
        "E[N(N-1)]": ns.factorial2,
        "E[T]": et,
        "E[T^2]": et2,
        "Var(T)": vt,
        "Pr(T>0)": ptpos,
        "E[TlogT]": tlogt,
        "rho": et2 / et if et > 0 else math.inf,
        "contraction": a.mean * et2,
    }
    clauses: dict[str, bool] = {}
    kind = p.kind
    if kind in (Kind.HOMOGENEOUS, Kind.COMMON_T):
        clauses["E[N]E[T]=1"] = abs(ns.mean * et - 1.0) <= tol_eq
        clauses["E[T^2]>0"] = et2 > 0
        clauses["E[T^2]<E[T]"] = et2 < et
        clauses["E[T]<1"] = et < 1
        clauses["E[N^2]<inf"] = math.isfinite(ns.second_moment)
    elif kind is Kind.FLOORED and p.m == 1:
        clauses["E[N]=(1-E[T])/E[T]"] = et > 0 and abs(ns.mean - (1 - et) / et) <= tol_eq
        clauses["E[T^2]>0"] = et2 > 0
        clauses["E[T^2]<E[T]"] = et2 < et
        clauses["E[T]<1"] = et < 1
        clauses["E[N^2]<inf"] = math.isfinite(ns.second_moment)
    elif kind is Kind.FLOORED:
        m = p.m
        clauses["E[N]=(1-mE[T])/E[T]"] = et > 0 and abs(ns.mean - (1 - m * et) / et) <= tol_eq
        clauses["E[T^2]>0"] = et2 > 0
        clauses["E[T^2]<E[T]"] = et2 < et
        clauses["E[T]<=1/m"] = et <= 1.0 / m + tol_eq
        clauses["E[N^2]<inf"] = math.isfinite(ns.second_moment)
    else:
        eb = p.b.mean
        vb = p.b.variance
        scalars["E[B]"] = eb
        scalars["Var(B)"] = vb
        clauses["E[B]>0"] = eb > 0
        clauses["Pr(N=0)<1"] = p.n.pr_zero() < 1
        clauses["Pr(T=0)<1"] = ptpos > 0
        clauses["Var(B)+Var(T)+Var(N)>0"] = vb + vt + ns.variance > 0
        clauses["0<E[N]E[T]<1"] = 0 < ns.mean * et < 1
        clauses["0<E[N]E[T^2]<1"] = 0 < ns.mean * et2 < 1
        if clauses["0<E[N]E[T]<1"]:
            derived = eb / (1.0 - ns.mean * et)
            scalars["mu"] = derived
            if p.mu is not None:
                clauses["mu=E[B]/(1-E[N]E[T])"] = abs(p.mu - derived) <= tol_eq
        scalars["contraction"] = ns.mean * et2
    if not kind.nonhomogeneous:
        scalars["mu"] = float(p.mu)

    failures = [name for name, ok in clauses.items() if not ok]
    satisfied = not failures

    alpha = solve_liu_alpha(p.n, p.t, p.shift, tol=tol_eq)
    liu_alpha_ok = alpha is not None and mean_t_log_t(p.t, alpha) <= 0
    branching = ptpos * a.mean > 1
    liu4 = bool(branching and liu_alpha_ok)
    liu5 = bool(
        branching
        and abs(a.mean * et - 1.0) <= tol_eq
        and math.isfinite(_shifted_n_log_plus(p.n, p.shift))
        and tlogt < 0
    )
    prop1 = bool(branching and tlogt < 0)

    if kind.nonhomogeneous:
        unique = satisfied and et2 < et
    else:
        unique = satisfied
    if not satisfied:
        verdict = "no finite-variance solution with the given mean"
    elif unique:
        verdict = "unique solution with finite variance"
    else:
        verdict = "exists, uniqueness not certified"
    return ConditionReport(
        kind=kind,
        satisfied=satisfied,
        scalars=scalars,
        failures=failures,
        clauses=clauses,
        liu_alpha=alpha,
        liu4=liu4,
        liu5=liu5,
        prop1=prop1,
        uniqueness_certified=unique,
        verdict=verdict,
    )
