"""Laplace-Stieltjes transforms of measures and of grid-sampled curves.

Curves are stored in the log domain, as ``L(s) = -log F(s)``, because the
iterates of the solver can be as small as ``exp(-1000)`` at the top of the
grid.  Between grid points a curve is interpolated with a monotone cubic
(PCHIP) in the coordinates ``(log s, log L(s))``.  Those coordinates are close
to linear both for small ``s`` (where ``L ~ mu1 s``) and for large ``s``, which
keeps the interpolation error small enough for the solver's per-step
monotonicity check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import AlphaOutOfRange, InvalidMoments, NegativeS, ZeroS, ZOutOfRange
from .measures import CountLaw, DiscreteMeasure, MomentPair

DEFAULT_GRID_POINTS = 513
DEFAULT_GRID_LO = 1e-3
DEFAULT_GRID_HI = 1e3
_SMALL = 0.5


def default_grid(points: int = DEFAULT_GRID_POINTS, lo: float = DEFAULT_GRID_LO, hi: float = DEFAULT_GRID_HI):
    return np.geomspace(lo, hi, points)


def extended_grid(s_lo: float, points: int = DEFAULT_GRID_POINTS,
                  lo: float = DEFAULT_GRID_LO, hi: float = DEFAULT_GRID_HI) -> np.ndarray:
    """The default grid, continued below ``lo`` with the same ratio down to ``s_lo``."""
    base = default_grid(points, lo, hi)
    if s_lo >= lo:
        return base
    step = np.log(hi / lo) / (points - 1)
    extra = int(np.ceil(np.log(lo / s_lo) / step))
    below = lo * np.exp(-step * np.arange(extra, 0, -1))
    return np.concatenate([below, base])


def _as_moments(mp) -> MomentPair:
    if isinstance(mp, MomentPair):
        return mp
    mu1, mu2 = mp
    return MomentPair(float(mu1), float(mu2))


def eckberg_neg_log(mp, s):
    """``-log`` of the two-moment upper bound on an LST."""
    mp = _as_moments(mp)
    s = np.asarray(s, dtype=np.float64)
    q = mp.mu1 * mp.mu1 / mp.mu2
    rate = mp.mu2 / mp.mu1
    if q >= 1.0:
        return mp.mu1 * s
    x = rate * s
    with np.errstate(divide="ignore", over="ignore"):
        near = -np.log1p(q * np.expm1(-x))
        far = -np.logaddexp(np.log1p(-q), np.log(q) - x)
    return np.where(x < 1.0, near, far)


def eckberg_bound(mp, s):
    """``1 - mu1^2/mu2 + (mu1^2/mu2) exp(-(mu2/mu1) s)``."""
    if np.any(np.asarray(s) < 0):
        raise NegativeS("s must be nonnegative")
    mp = _as_moments(mp)
    out = np.exp(-eckberg_neg_log(mp, s))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class LstCurve:
    """An LST sampled on a log-spaced grid, with its first two moments attached.

    ``neg_log[i] = -log F(grid[i])``.
    """

    grid: np.ndarray
    neg_log: np.ndarray
    mu1: float
    mu2: float
    _interp: PchipInterpolator = field(default=None, repr=False)

    def __post_init__(self):
        grid = np.ascontiguousarray(self.grid, dtype=np.float64)
        neg_log = np.ascontiguousarray(self.neg_log, dtype=np.float64)
        if grid.ndim != 1 or grid.shape != neg_log.shape or grid.size < 2:
            raise ValueError("grid and values must be 1-D arrays of equal length >= 2")
        if grid[0] <= 0 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be positive and strictly increasing")
        if np.any(~np.isfinite(neg_log)) or np.any(neg_log <= 0):
            raise ValueError("curve values must lie in (0, 1)")
        MomentPair(self.mu1, self.mu2)
        grid.setflags(write=False)
        neg_log.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "neg_log", neg_log)
        object.__setattr__(self, "_interp", PchipInterpolator(np.log(grid), np.log(neg_log)))

    @classmethod
    def from_function(cls, fn, mu1: float, mu2: float, grid=None) -> "LstCurve":
        """Sample an LST ``fn(s)``; ``fn`` returns values of ``F`` itself."""
        grid = default_grid() if grid is None else np.asarray(grid, dtype=np.float64)
        return cls(grid, -np.log(fn(grid)), mu1, mu2)

    @classmethod
    def from_measure(cls, m: DiscreteMeasure, grid=None) -> "LstCurve":
        grid = default_grid() if grid is None else np.asarray(grid, dtype=np.float64)
        return cls(grid, neg_log_lst(m, grid), m.mean, m.second_moment)

    @classmethod
    def exponential(cls, mu: float = 1.0, grid=None) -> "LstCurve":
        grid = default_grid() if grid is None else np.asarray(grid, dtype=np.float64)
        return cls(grid, np.log1p(mu * grid), mu, 2 * mu * mu)

    @property
    def moments(self) -> MomentPair:
        return MomentPair(self.mu1, self.mu2)

    @property
    def values(self) -> np.ndarray:
        return np.exp(-self.neg_log)

    def envelope(self, s):
        """Lower and upper bounds ``exp(-mu1 s)`` and the Eckberg bound at ``s``."""
        s = np.asarray(s, dtype=np.float64)
        return np.exp(-self.mu1 * s), eckberg_bound(self.moments, s)

    def neg_log_at(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=np.float64)
        out = np.zeros_like(s)
        lo, hi = self.grid[0], self.grid[-1]
        below = (s > 0) & (s < lo)
        above = s > hi
        inside = (s >= lo) & (s <= hi)
        if inside.any():
            out[inside] = np.exp(self._interp(np.log(s[inside])))
        if below.any():
            x = s[below]
            kappa2 = self.mu2 - self.mu1 * self.mu1
            taylor = self.mu1 * x - 0.5 * kappa2 * x * x
            out[below] = np.clip(taylor, eckberg_neg_log(self.moments, x), self.mu1 * x)
        if above.any():
            x = s[above]
            u = np.log(self.grid[-2:])
            v = np.log(self.neg_log[-2:])
            slope = max((v[1] - v[0]) / (u[1] - u[0]), 0.0)
            guess = np.exp(v[1] + slope * (np.log(x) - u[1]))
            floor = np.maximum(self.neg_log[-1], eckberg_neg_log(self.moments, x))
            out[above] = np.minimum(np.maximum(guess, floor), self.mu1 * x)
        return out

    def __call__(self, s):
        out = np.exp(-self.neg_log_at(s))
        return float(out) if np.ndim(out) == 0 else out

    def with_values(self, neg_log) -> "LstCurve":
        return LstCurve(self.grid, neg_log, self.mu1, self.mu2)

    def envelope_violation(self) -> float:
        """Largest amount by which a grid value leaves its moment envelope."""
        lower = self.mu1 * self.grid
        upper = eckberg_neg_log(self.moments, self.grid)
        vals = self.values
        over = np.exp(-upper) - vals
        under = vals - np.exp(-lower)
        return float(max(0.0, -over.min(), -under.min()))


Source = Union[DiscreteMeasure, LstCurve]


def _lst_measure(m: DiscreteMeasure, s: np.ndarray) -> np.ndarray:
    flat = s.ravel()
    out = np.empty_like(flat)
    chunk = max(1, 4_000_000 // max(m.size, 1))
    for i in range(0, flat.size, chunk):
        part = flat[i:i + chunk]
        out[i:i + chunk] = np.exp(-np.multiply.outer(part, m.locs)) @ m.masses
    return out.reshape(s.shape)


def _one_minus_measure(m: DiscreteMeasure, s: np.ndarray) -> np.ndarray:
    flat = s.ravel()
    out = np.empty_like(flat)
    chunk = max(1, 4_000_000 // max(m.size, 1))
    for i in range(0, flat.size, chunk):
        part = flat[i:i + chunk]
        out[i:i + chunk] = -(np.expm1(-np.multiply.outer(part, m.locs)) @ m.masses)
    return out.reshape(s.shape)


def neg_log_lst(src: Source, s) -> np.ndarray:
    """``-log F(s)`` for a measure or curve, vectorised over ``s``."""
    s = np.asarray(s, dtype=np.float64)
    if isinstance(src, LstCurve):
        return src.neg_log_at(s)
    near = src.mean * s < _SMALL
    out = np.empty_like(s)
    if near.any():
        out[near] = -np.log1p(-_one_minus_measure(src, s[near]))
    if (~near).any():
        x = s[~near]
        pos = src.masses > 0
        logs = np.log(src.masses[pos]) - np.multiply.outer(x, src.locs[pos])
        top = logs.max(axis=-1, keepdims=True)
        out[~near] = -(top[..., 0] + np.log(np.exp(logs - top).sum(axis=-1)))
    return out


def lst_eval(src: Source, s):
    """``F(s) = E[exp(-s X)]``."""
    arr = np.asarray(s, dtype=np.float64)
    if np.any(arr < 0):
        raise NegativeS("s must be nonnegative")
    if isinstance(src, LstCurve):
        out = src(arr)
    else:
        out = _lst_measure(src, arr)
    return float(out) if np.ndim(out) == 0 else out


def one_minus_lst(src: Source, s):
    """``1 - F(s)`` without cancellation at small ``s``."""
    arr = np.asarray(s, dtype=np.float64)
    if isinstance(src, LstCurve):
        out = -np.expm1(-src.neg_log_at(arr))
    else:
        out = _one_minus_measure(src, arr)
    return float(out) if np.ndim(out) == 0 else out


def _mean_of(src: Source) -> float:
    return src.mu1 if isinstance(src, LstCurve) else src.mean


def _second_of(src: Source) -> float:
    return src.mu2 if isinstance(src, LstCurve) else src.second_moment


def equilibrium_lst(src: Source, s):
    """LST of the first-order equilibrium law, ``(1 - F(s)) / (mu s)``."""
    arr = np.asarray(s, dtype=np.float64)
    if np.any(arr <= 0):
        raise ZeroS("equilibrium transform needs s > 0")
    mu = _mean_of(src)
    if not mu > 0:
        raise InvalidMoments("equilibrium transform needs a positive mean")
    out = np.asarray(one_minus_lst(src, arr)) / (mu * arr)
    return float(out) if np.ndim(out) == 0 else out


def equilibrium_mean(src: Source) -> float:
    """Mean of the equilibrium law, ``mu2 / (2 mu1)``."""
    return _second_of(src) / (2.0 * _mean_of(src))


def stable_map(src: Source, alpha: float, s):
    """LST of ``S_alpha * X**(1/alpha)``, i.e. ``F(s**alpha)``."""
    if not 0 < alpha < 1:
        raise AlphaOutOfRange(f"alpha must lie in (0,1), got {alpha!r}")
    arr = np.asarray(s, dtype=np.float64)
    if np.any(arr < 0):
        raise NegativeS("s must be nonnegative")
    return lst_eval(src, np.power(arr, alpha))


def pgf_eval(n: CountLaw, z):
    """``P_N(z) = E[z**N]`` for ``z`` in [0, 1]."""
    arr = np.asarray(z, dtype=np.float64)
    if np.any(arr < 0) or np.any(arr > 1):
        raise ZOutOfRange("pgf argument must lie in [0, 1]")
    out = n.pgf(arr)
    return float(out) if np.ndim(out) == 0 else out


def dump_csv(s, values) -> str:
    """Curve dump: header ``s,value`` then one line per point, 17 significant digits."""
    lines = ["s,value"]
    lines += [f"{a:.17g},{b:.17g}" for a, b in zip(np.asarray(s).tolist(), np.asarray(values).tolist())]
    return "\n".join(lines) + "\n"


def parse_csv(text: str) -> tuple[np.ndarray, np.ndarray]:
    rows = text.strip().splitlines()
    if not rows or rows[0].strip() != "s,value":
        raise ValueError("curve dump must start with the header 's,value'")
    data = np.array([[float(x) for x in row.split(",")] for row in rows[1:]])
    return data[:, 0], data[:, 1]
