"""Closed-form moments and the monotone Picard iteration for the fixed point.

The iteration starts from the two-atom law with the solution's first two
moments.  Its LST dominates the solution's, and each application of the
equation's right-hand side keeps the moments and lowers the transform, so the
iterates decrease pointwise to the solution.  Two backends are available:

* ``grid``: the transform is sampled on a log-spaced grid (see
  :class:`~pfp.transforms.LstCurve`); works for every count law.
* ``discrete``: the iterate is an explicit :class:`DiscreteMeasure`, with atom
  merging to bound its size; needs a count law with finite support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Union

import numpy as np
from scipy.special import logsumexp

from .conditions import EQ_TOL, Kind, ProblemSpec, check_conditions
from .errors import BackendUnsupported, ConditionsNotSatisfied, MaxIterExceeded, MonotonicityViolated
from .measures import (
    DEFAULT_ATOM_CAP,
    DEFAULT_LATTICE_WIDTH,
    DiscreteMeasure,
    MomentPair,
    _weighted_sum_law,
    count_stats,
    eckberg_two_atom,
)
from .transforms import (
    DEFAULT_GRID_HI,
    DEFAULT_GRID_LO,
    DEFAULT_GRID_POINTS,
    LstCurve,
    default_grid,
    eckberg_neg_log,
    extended_grid,
    neg_log_lst,
)

MONOTONE_TOL = 1e-9
DEFAULT_TOL = 1e-8
_SMALL_LOG = 0.5

Iterate = Union[DiscreteMeasure, LstCurve]


# ---------------------------------------------------------------------------
# moments


@dataclass(frozen=True)
class MomentReport:
    mu1: float
    mu2: float
    variance: float
    formula_kind: str

    def to_dict(self) -> dict:
        return {"mu1": self.mu1, "mu2": self.mu2, "variance": self.variance,
                "formula_kind": self.formula_kind}


def closed_form_moments(p: ProblemSpec, tol_eq: float = EQ_TOL) -> MomentReport:
    """Mean, second moment and variance of the solution, from the kind's formula."""
    rep = check_conditions(p, tol_eq)
    if not rep.satisfied:
        raise ConditionsNotSatisfied(rep.failures)
    ns = count_stats(p.n)
    et, et2, vt = p.t.mean, p.t.second_moment, p.t.variance
    denom = 1.0 - ns.mean * et2
    kind = p.kind
    if kind is Kind.HOMOGENEOUS or kind is Kind.FLOORED:
        a = ns.shifted(p.shift)
        mu = float(p.mu)
        var = (et * et * a.variance + a.mean * vt) / (1.0 - a.mean * et2) * mu * mu
        label = "floored" if kind is Kind.FLOORED else "homogeneous"
    elif kind is Kind.COMMON_T:
        mu = float(p.mu)
        var = (ns.second_moment * et2 - 1.0) / denom * mu * mu
        label = "common_t"
    elif kind is Kind.NONHOMOGENEOUS:
        mu = p.target_mean()
        vb = p.b.variance
        var = (vb + mu * mu * et * et * ns.variance + mu * mu * ns.mean * vt) / denom
        label = "nonhomogeneous"
    else:
        mu = p.target_mean()
        eb, vb = p.b.mean, p.b.variance
        var = (vb + eb * (2 * mu - eb) + (ns.second_moment * et2 - 1.0) * mu * mu) / denom
        label = "nonhomogeneous_common_t"
    var = max(var, 0.0)
    return MomentReport(mu, mu * mu + var, var, label)


def second_moment_formula(p: ProblemSpec) -> float:
    """The solution's second moment written directly (not via the variance)."""
    ns = count_stats(p.n)
    et, et2 = p.t.mean, p.t.second_moment
    kind = p.kind
    if kind in (Kind.HOMOGENEOUS, Kind.FLOORED):
        a = ns.shifted(p.shift)
        return a.factorial2 * et * et / (1.0 - a.mean * et2) * p.mu ** 2
    if kind is Kind.COMMON_T:
        return ns.factorial2 * et2 / (1.0 - ns.mean * et2) * p.mu ** 2
    mu = p.target_mean()
    vb = p.b.variance
    if kind is Kind.NONHOMOGENEOUS:
        num = vb + mu * mu * et * et * ns.variance + mu * mu * (1.0 - ns.mean * et * et)
        return num / (1.0 - ns.mean * et2)
    eb2 = p.b.second_moment
    eb = p.b.mean
    num = eb2 + 2 * eb * (mu - eb) + ns.factorial2 * et2 * mu * mu
    return num / (1.0 - ns.mean * et2)


def propagate_moments(p: ProblemSpec, mu1: float, mu2: float) -> tuple[float, float]:
    """First two moments of the right-hand side when ``X`` has moments ``mu1, mu2``."""
    et, et2 = p.t.mean, p.t.second_moment
    if p.kind.common_t:
        ns = count_stats(p.n)
        s1 = et * ns.mean * mu1
        s2 = et2 * (ns.mean * mu2 + ns.factorial2 * mu1 * mu1)
    else:
        a = p.count_stats()
        s1 = a.mean * et * mu1
        s2 = a.mean * et2 * mu2 + a.factorial2 * et * et * mu1 * mu1
    if p.b is None:
        return s1, s2
    eb = p.b.mean
    return eb + s1, p.b.second_moment + 2 * eb * s1 + s2


def contraction_rate(p: ProblemSpec) -> float:
    """Per-step contraction factor ``E[N+m] E[T^2]`` (``E[N] E[T^2]`` with B)."""
    return p.count_stats().mean * p.t.second_moment


# ---------------------------------------------------------------------------
# Picard step


def _log_mix(w: np.ndarray, logs: np.ndarray) -> np.ndarray:
    """``log sum_j w_j exp(logs_j)`` per column, accurate when all logs are near 0."""
    out = np.empty(logs.shape[1])
    near = np.all(logs > -_SMALL_LOG, axis=0)
    if near.any():
        out[near] = np.log1p(w @ np.expm1(logs[:, near]))
    if (~near).any():
        out[~near] = logsumexp(logs[:, ~near], b=w[:, None], axis=0)
    return np.minimum(out, 0.0)


def _grid_neg_log(p: ProblemSpec, cur: LstCurve, s: np.ndarray, b_neg_log=None) -> np.ndarray:
    """``-log`` of the right-hand side transform at ``s``, given the iterate ``cur``."""
    t, w = p.t.locs, p.t.masses
    inner = cur.neg_log_at(np.multiply.outer(t, s))
    if p.kind.common_t:
        log_f = _log_mix(w, p.n.log_pgf(-inner))
    else:
        lz = _log_mix(w, -inner)
        log_f = p.n.log_pgf(lz) + p.shift * lz
    out = -log_f
    if p.b is not None:
        out = out + (neg_log_lst(p.b, s) if b_neg_log is None else b_neg_log)
    return out


def _discrete_step(p: ProblemSpec, cur: DiscreteMeasure, delta=None, cap=DEFAULT_ATOM_CAP):
    if not p.n.finite_support:
        raise BackendUnsupported("the discrete backend needs a count law with finite support")
    return _weighted_sum_law(p.t, cur, p.n, p.shift, p.b, p.kind.common_t, delta=delta, cap=cap)


def picard_step(p: ProblemSpec, cur: Iterate, merge_delta: Optional[float] = None) -> Iterate:
    """Apply the right-hand side of the equation once.

    A measure maps to a measure (merged with ``merge_delta`` when given); a
    curve maps to a curve on the same grid whose attached moments are updated
    by the exact moment recursion.
    """
    if isinstance(cur, LstCurve):
        mu1, mu2 = propagate_moments(p, cur.mu1, cur.mu2)
        return LstCurve(cur.grid, _grid_neg_log(p, cur, cur.grid), mu1, mu2)
    return _discrete_step(p, cur, merge_delta)[0]


def fixed_point_residual(p: ProblemSpec, sol: Iterate, s=None) -> float:
    """``sup_s |F(s) - (right-hand side)(s)|`` over ``s`` (default: the standard grid)."""
    s = default_grid() if s is None else np.asarray(s, dtype=np.float64)
    lhs = neg_log_lst(sol, s)
    if isinstance(sol, LstCurve):
        rhs = _grid_neg_log(p, sol, s)
    else:
        rhs = _measure_rhs(p, sol, s)
    return float(np.max(np.abs(np.exp(-lhs) - np.exp(-rhs))))


def _measure_rhs(p: ProblemSpec, sol: DiscreteMeasure, s: np.ndarray) -> np.ndarray:
    # Evaluate the right-hand side through transforms instead of building the law.
    t, w = p.t.locs, p.t.masses
    inner = neg_log_lst(sol, np.multiply.outer(t, s).ravel()).reshape(t.size, s.size)
    if p.kind.common_t:
        log_f = _log_mix(w, p.n.log_pgf(-inner))
    else:
        lz = _log_mix(w, -inner)
        log_f = p.n.log_pgf(lz) + p.shift * lz
    out = -log_f
    if p.b is not None:
        out = out + neg_log_lst(p.b, s)
    return out


# ---------------------------------------------------------------------------
# solve


@dataclass
class SolveOptions:
    tol: float = DEFAULT_TOL
    max_iter: Optional[int] = None
    backend: str = "auto"
    merge_delta: Optional[float] = None
    grid_points: int = DEFAULT_GRID_POINTS
    atom_cap: int = DEFAULT_ATOM_CAP
    strict: bool = False
    tol_eq: float = EQ_TOL
    monotone_tol: float = MONOTONE_TOL


@dataclass
class SolveResult:
    solution: Iterate
    backend: str
    iterations: int
    converged: bool
    sup_diffs: list
    max_increases: list
    contraction_rate: float
    certified_error: float
    error_estimate: float
    moment_drift: float
    extrapolation_used: bool
    uniqueness_certified: bool
    moments: MomentReport
    extracted_mean: float = math.nan
    extracted_variance: float = math.nan
    notes: list = field(default_factory=list)

    def lst(self, s):
        from .transforms import lst_eval

        return lst_eval(self.solution, s)

    def ratios(self) -> np.ndarray:
        d = np.asarray(self.sup_diffs, dtype=np.float64)
        if d.size < 2:
            return np.empty(0)
        with np.errstate(divide="ignore", invalid="ignore"):
            return d[1:] / d[:-1]

    def summary(self) -> dict:
        return {
            "backend": self.backend,
            "iterations": self.iterations,
            "converged": self.converged,
            "final_sup_diff": self.sup_diffs[-1] if self.sup_diffs else None,
            "max_increase": max(self.max_increases) if self.max_increases else 0.0,
            "contraction_rate": self.contraction_rate,
            "certified_error": self.certified_error,
            "error_estimate": self.error_estimate,
            "moment_drift": self.moment_drift,
            "extrapolation_used": self.extrapolation_used,
            "uniqueness_certified": self.uniqueness_certified,
            "mean": self.extracted_mean,
            "variance": self.extracted_variance,
            "support_size": self.solution.size if isinstance(self.solution, DiscreteMeasure) else None,
            "notes": list(self.notes),
        }


def default_max_iter(tol: float, mp: MomentPair, rho: float, s_max: float = DEFAULT_GRID_HI) -> int:
    """Iterations after which the contraction certificate drops below ``tol``."""
    start = 2.0 * mp.equilibrium_mean * s_max
    if rho <= 0 or tol >= start:
        return 10
    return int(math.ceil(math.log(tol / start) / math.log(rho))) + 10


def _support_bound(p: ProblemSpec, size: int, steps: int, cap: int) -> int:
    """Upper bound on the atom count after ``steps`` exact iterations."""
    ks, _ = p.n.support()
    counts = [int(k) + p.shift for k in ks]
    for _ in range(steps):
        base = size if p.kind.common_t else size * p.t.size
        total = sum(math.comb(base + k - 1, k) for k in counts)
        if p.kind.common_t:
            total *= p.t.size
        if p.b is not None:
            total *= p.b.size
        size = total
        if size > cap:
            return size
    return size


def choose_backend(p: ProblemSpec, mp: MomentPair, cap: int = DEFAULT_ATOM_CAP) -> str:
    """``discrete`` when N has finite support and three exact steps stay under ``cap``."""
    if not p.n.finite_support:
        return "grid"
    start = eckberg_two_atom(mp).size
    return "discrete" if _support_bound(p, start, 3, cap) <= cap else "grid"


def extract_moments(curve: LstCurve, window: float = 1e-2, degree: int = 3) -> tuple[float, float]:
    """Mean and variance read off the sampled transform near ``s = 0``.

    Fits ``-log F(s) / s = k1 - k2 s / 2 + ...`` by least squares on grid points
    with ``mu1 s <= window``; ``k1`` is the mean and ``k2`` the variance.
    """
    s = curve.grid
    sel = curve.mu1 * s <= window
    if sel.sum() < degree + 2:
        sel = np.zeros_like(sel)
        sel[: degree + 2] = True
    x = s[sel]
    y = curve.neg_log[sel] / x
    coef = np.polynomial.polynomial.polyfit(x, y, degree)
    return float(coef[0]), float(-2.0 * coef[1])


def _curve_drop(old: np.ndarray, new: np.ndarray) -> tuple[float, float]:
    """Sup of ``|F_old - F_new|`` and the largest increase ``F_new - F_old``."""
    diff = np.exp(-new) - np.exp(-old)
    return float(np.max(np.abs(diff))), float(max(np.max(diff), 0.0))


def solve(p: ProblemSpec, opts: Optional[SolveOptions] = None, **kw) -> SolveResult:
    """Construct the finite-variance solution by Picard iteration.

    Keyword arguments override fields of ``opts``.  A run that reaches
    ``max_iter`` returns its last iterate with ``converged=False``, or raises
    :class:`MaxIterExceeded` when ``strict`` is set.
    """
    opts = opts or SolveOptions()
    unknown = set(kw) - {f.name for f in fields(SolveOptions)}
    if unknown:
        raise TypeError(f"unknown solve option {sorted(unknown)[0]!r}")
    opts = replace(opts, **kw)
    report = check_conditions(p, opts.tol_eq)
    if not report.satisfied:
        raise ConditionsNotSatisfied(report.failures)
    mr = closed_form_moments(p, opts.tol_eq)
    mp = MomentPair(mr.mu1, mr.mu2)
    rho = contraction_rate(p)
    max_iter = opts.max_iter if opts.max_iter is not None else default_max_iter(opts.tol, mp, rho)

    backend = opts.backend
    if backend == "auto":
        backend = choose_backend(p, mp, opts.atom_cap)
    if backend == "discrete" and not p.n.finite_support:
        raise BackendUnsupported("the discrete backend needs a count law with finite support")
    if backend not in ("grid", "discrete"):
        raise BackendUnsupported(f"unknown backend {backend!r}")

    if backend == "grid":
        res = _solve_grid(p, mp, rho, max_iter, opts)
    else:
        res = _solve_discrete(p, mp, rho, max_iter, opts)
    res.moments = mr
    res.uniqueness_certified = report.uniqueness_certified
    if not report.uniqueness_certified:
        res.notes.append("uniqueness not certified: returned solution is the limit from the two-atom start")
    if not res.converged and opts.strict:
        raise MaxIterExceeded(res)
    return res


def _certificates(mp: MomentPair, rho: float, n: int, last_diff: float, s_max: float):
    certified = 2.0 * mp.equilibrium_mean * s_max * rho ** n
    if rho < 1 and last_diff is not None:
        empirical = last_diff * rho / (1.0 - rho)
        return certified, min(certified, empirical)
    return certified, certified


def _solve_grid(p: ProblemSpec, mp: MomentPair, rho: float, max_iter: int, opts: SolveOptions) -> SolveResult:
    s_lo = min(DEFAULT_GRID_LO, 1e-5 * mp.mu1 / mp.mu2)
    grid = extended_grid(s_lo, opts.grid_points)
    b_neg_log = neg_log_lst(p.b, grid) if p.b is not None else None
    cur = LstCurve(grid, eckberg_neg_log(mp, grid), mp.mu1, mp.mu2)
    diffs: list[float] = []
    rises: list[float] = []
    converged = False
    n = 0
    while n < max_iter:
        new = _grid_neg_log(p, cur, grid, b_neg_log)
        sup, rise = _curve_drop(cur.neg_log, new)
        n += 1
        diffs.append(sup)
        rises.append(rise)
        if rise > opts.monotone_tol:
            raise MonotonicityViolated(
                f"iterate increased by {rise:.3e} at step {n}; interpolation overshoot"
            )
        mu1, mu2 = propagate_moments(p, cur.mu1, cur.mu2)
        cur = LstCurve(grid, new, mu1, mu2)
        if sup <= opts.tol:
            converged = True
            break
    certified, estimate = _certificates(mp, rho, n, diffs[-1] if diffs else None, grid[-1])
    mean, var = extract_moments(cur)
    return SolveResult(
        solution=cur,
        backend="grid",
        iterations=n,
        converged=converged,
        sup_diffs=diffs,
        max_increases=rises,
        contraction_rate=rho,
        certified_error=certified,
        error_estimate=estimate,
        moment_drift=abs(cur.mu2 - mp.mu2),
        extrapolation_used=bool(p.t.locs.max() > 1.0),
        uniqueness_certified=True,
        moments=None,
        extracted_mean=mean,
        extracted_variance=var,
    )


def _solve_discrete(p: ProblemSpec, mp: MomentPair, rho: float, max_iter: int, opts: SolveOptions) -> SolveResult:
    grid = default_grid(opts.grid_points)
    delta = opts.merge_delta if opts.merge_delta is not None else DEFAULT_LATTICE_WIDTH
    cur = eckberg_two_atom(mp)
    cur_nl = neg_log_lst(cur, grid)
    diffs: list[float] = []
    rises: list[float] = []
    drift = 0.0
    converged = False
    n = 0
    while n < max_iter:
        nxt, deficit = _discrete_step(p, cur, delta, opts.atom_cap)
        drift += deficit
        nxt_nl = neg_log_lst(nxt, grid)
        sup, rise = _curve_drop(cur_nl, nxt_nl)
        n += 1
        diffs.append(sup)
        rises.append(rise)
        if rise > opts.monotone_tol:
            raise MonotonicityViolated(f"iterate increased by {rise:.3e} at step {n}")
        cur, cur_nl = nxt, nxt_nl
        if sup <= opts.tol:
            converged = True
            break
    certified, estimate = _certificates(mp, rho, n, diffs[-1] if diffs else None, grid[-1])
    return SolveResult(
        solution=cur,
        backend="discrete",
        iterations=n,
        converged=converged,
        sup_diffs=diffs,
        max_increases=rises,
        contraction_rate=rho,
        certified_error=certified,
        error_estimate=estimate,
        moment_drift=drift,
        extrapolation_used=False,
        uniqueness_certified=True,
        moments=None,
        extracted_mean=cur.mean,
        extracted_variance=cur.variance,
    )
