"""Finite discrete probability measures on [0, inf) and count laws.

A :class:`DiscreteMeasure` stores sorted atom locations and their masses as
numpy arrays.  All arithmetic here (scaling, convolution, mixing, merging) is
exact up to floating point, except :func:`merge_atoms`, which trades a
quantified loss of second moment for a smaller atom count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from numba import njit

from .errors import (
    InfiniteSupportCount,
    InvalidCountLaw,
    InvalidMoments,
    MassNotNormalized,
    NegativeLocation,
    NonPositiveMass,
    ZeroMean,
)

MASS_TOL = 1e-9
DEFAULT_ATOM_CAP = 20000
DEFAULT_PAIR_BUDGET = 10_000_000


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Probability law with finitely many atoms at nonnegative locations."""

    locs: np.ndarray
    masses: np.ndarray

    @classmethod
    def _raw(cls, locs, masses) -> "DiscreteMeasure":
        # caller guarantees sorted, unique, positive-mass atoms
        locs = np.ascontiguousarray(locs, dtype=np.float64)
        masses = np.ascontiguousarray(masses, dtype=np.float64)
        locs.setflags(write=False)
        masses.setflags(write=False)
        return cls(locs, masses)

    @classmethod
    def point(cls, x: float) -> "DiscreteMeasure":
        return cls._raw([float(x)], [1.0])

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.locs.tolist(), self.masses.tolist()))

    @property
    def size(self) -> int:
        return int(self.locs.size)

    @property
    def mean(self) -> float:
        return moment(self, 1)

    @property
    def second_moment(self) -> float:
        return moment(self, 2)

    @property
    def variance(self) -> float:
        mu = self.mean
        return float(np.dot(self.masses, (self.locs - mu) ** 2))

    def prob_positive(self) -> float:
        return float(self.masses[self.locs > 0].sum())

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.size == 1:
            return np.full(size, self.locs[0])
        return self.locs[_inverse_cdf(self.masses, rng.random(size))]

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return np.array_equal(self.locs, other.locs) and np.array_equal(self.masses, other.masses)

    def __hash__(self) -> int:
        return hash((self.locs.tobytes(), self.masses.tobytes()))

    def __repr__(self) -> str:
        if self.size <= 6:
            body = ", ".join(f"({x:.6g}, {w:.6g})" for x, w in self.atoms)
        else:
            body = f"{self.size} atoms on [{self.locs[0]:.4g}, {self.locs[-1]:.4g}]"
        return f"DiscreteMeasure({body})"


def _inverse_cdf(masses: np.ndarray, u) -> np.ndarray:
    cdf = np.cumsum(masses)
    return np.minimum(np.searchsorted(cdf, u * cdf[-1], side="right"), masses.size - 1)


def _dedupe(locs: np.ndarray, masses: np.ndarray) -> DiscreteMeasure:
    """Sort atoms and merge exactly coincident locations."""
    uniq, inverse = np.unique(locs, return_inverse=True)
    if uniq.size == locs.size:
        order = np.argsort(locs, kind="stable")
        return DiscreteMeasure._raw(locs[order], masses[order])
    summed = np.bincount(inverse.ravel(), weights=masses, minlength=uniq.size)
    keep = summed > 0
    return DiscreteMeasure._raw(uniq[keep], summed[keep])


def mk_discrete(atoms: Iterable[Sequence[float]]) -> DiscreteMeasure:
    """Validated constructor from ``(location, mass)`` pairs.

    Duplicate locations are merged by adding their masses.
    """
    arr = np.asarray([(float(x), float(w)) for x, w in atoms], dtype=np.float64)
    if arr.size == 0:
        raise MassNotNormalized("a measure needs at least one atom")
    locs, masses = arr[:, 0], arr[:, 1]
    if not np.all(np.isfinite(locs)) or not np.all(np.isfinite(masses)):
        raise NonPositiveMass("atoms must be finite numbers")
    if np.any(locs < 0):
        raise NegativeLocation(f"negative location {locs[locs < 0][0]!r}")
    if np.any(masses <= 0):
        raise NonPositiveMass(f"non-positive mass {masses[masses <= 0][0]!r}")
    total = math.fsum(masses.tolist())
    if abs(total - 1.0) > MASS_TOL:
        raise MassNotNormalized(f"masses sum to {total!r}, not 1")
    return _dedupe(locs, masses / total)


def moment(m: DiscreteMeasure, k: float) -> float:
    """``E[X**k]`` with the convention ``0**0 == 1``."""
    if k < 0:
        raise ValueError("moment order must be nonnegative")
    if k == 0:
        return float(m.masses.sum())
    return float(np.dot(m.masses, np.power(m.locs, k)))


def expect(m: DiscreteMeasure, fn) -> float:
    return float(np.dot(m.masses, fn(m.locs)))


def mean_t_log_t(m: DiscreteMeasure, alpha: float = 1.0) -> float:
    """``E[T**alpha * log T]`` with ``0 log 0 == 0``."""
    pos = m.locs > 0
    x = m.locs[pos]
    return float(np.dot(m.masses[pos], np.power(x, alpha) * np.log(x)))


def length_biased(t: DiscreteMeasure) -> DiscreteMeasure:
    """Size-biased law ``t dF(t) / E[T]``; atoms at zero drop out."""
    mu = t.mean
    if mu <= 0:
        raise ZeroMean("length-biasing needs E[T] > 0")
    pos = t.locs > 0
    w = t.locs[pos] * t.masses[pos] / mu
    return DiscreteMeasure._raw(t.locs[pos], w)


@dataclass(frozen=True)
class MomentPair:
    mu1: float
    mu2: float

    def __post_init__(self):
        if not (self.mu1 > 0) or not math.isfinite(self.mu2):
            raise InvalidMoments(f"need mu1 > 0, got {self.mu1!r}")
        floor = self.mu1 * self.mu1
        if self.mu2 < floor:
            if self.mu2 < floor * (1 - 1e-12):
                raise InvalidMoments(f"mu2={self.mu2!r} < mu1^2={floor!r}")
            object.__setattr__(self, "mu2", floor)

    @property
    def variance(self) -> float:
        return self.mu2 - self.mu1 * self.mu1

    @property
    def equilibrium_mean(self) -> float:
        return self.mu2 / (2.0 * self.mu1)


def eckberg_two_atom(mp: MomentPair) -> DiscreteMeasure:
    """Two-atom law that attains the moment-based upper bound on an LST.

    Mass ``1 - mu1**2/mu2`` sits at 0 and the rest at ``mu2/mu1``.
    """
    q = mp.mu1 * mp.mu1 / mp.mu2
    if q >= 1.0:
        return DiscreteMeasure.point(mp.mu1)
    return DiscreteMeasure._raw([0.0, mp.mu2 / mp.mu1], [1.0 - q, q])


# ---------------------------------------------------------------------------
# count laws


_FAMILIES = ("degenerate", "explicit", "geometric1", "geometric0", "poisson")


@dataclass(frozen=True)
class CountLaw:
    """Law of a count ``N`` on {0, 1, 2, ...}.

    Use the classmethod constructors; ``family`` is one of ``degenerate``,
    ``explicit``, ``geometric1`` (support 1, 2, ...), ``geometric0``
    (support 0, 1, ...) and ``poisson``.
    """

    family: str
    k: int = 0
    pmf: tuple = ()
    p: float = 0.0
    lam: float = 0.0
    _ks: np.ndarray = field(default=None, repr=False, compare=False)
    _ps: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise InvalidCountLaw(f"unknown family {self.family!r}")
        if self.family == "degenerate":
            if int(self.k) != self.k or self.k < 0:
                raise InvalidCountLaw("degenerate count needs an integer k >= 0")
            ks, ps = np.array([int(self.k)]), np.array([1.0])
        elif self.family == "explicit":
            if not self.pmf:
                raise InvalidCountLaw("explicit pmf is empty")
            table: dict[int, float] = {}
            for k, w in self.pmf:
                if int(k) != k or k < 0:
                    raise InvalidCountLaw(f"count value {k!r} is not a nonnegative integer")
                if not (w >= 0) or not math.isfinite(w):
                    raise InvalidCountLaw(f"pmf mass {w!r} is negative")
                table[int(k)] = table.get(int(k), 0.0) + float(w)
            total = math.fsum(table.values())
            if abs(total - 1.0) > 1e-12:
                raise InvalidCountLaw(f"pmf masses sum to {total!r}, not 1")
            items = sorted((k, w) for k, w in table.items() if w > 0)
            object.__setattr__(self, "pmf", tuple(items))
            ks = np.array([k for k, _ in items])
            ps = np.array([w for _, w in items])
        elif self.family in ("geometric1", "geometric0"):
            if not (0 < self.p < 1):
                raise InvalidCountLaw(f"geometric p must lie in (0,1), got {self.p!r}")
            ks = ps = None
        else:
            if not (self.lam > 0) or not math.isfinite(self.lam):
                raise InvalidCountLaw(f"poisson rate must be positive, got {self.lam!r}")
            ks = ps = None
        object.__setattr__(self, "_ks", ks)
        object.__setattr__(self, "_ps", ps)

    @classmethod
    def degenerate(cls, k: int) -> "CountLaw":
        return cls("degenerate", k=k)

    @classmethod
    def explicit(cls, pmf) -> "CountLaw":
        if isinstance(pmf, dict):
            pmf = pmf.items()
        return cls("explicit", pmf=tuple((k, float(w)) for k, w in pmf))

    @classmethod
    def geometric1(cls, p: float) -> "CountLaw":
        return cls("geometric1", p=float(p))

    @classmethod
    def geometric0(cls, p: float) -> "CountLaw":
        return cls("geometric0", p=float(p))

    @classmethod
    def poisson(cls, lam: float) -> "CountLaw":
        return cls("poisson", lam=float(lam))

    @property
    def finite_support(self) -> bool:
        return self._ks is not None

    def support(self) -> tuple[np.ndarray, np.ndarray]:
        """Support points and masses; only for finite-support families."""
        if not self.finite_support:
            raise InfiniteSupportCount(f"{self.family} count has infinite support")
        return self._ks, self._ps

    def pmf_table(self, tail: float = 1e-17) -> tuple[np.ndarray, np.ndarray]:
        """Support and masses, truncated where the remaining tail is below ``tail``."""
        if self.finite_support:
            return self._ks, self._ps
        if self.family == "poisson":
            from scipy import stats

            # isf is unreliable this far in the tail, so trim a generous range by sf
            top = int(math.ceil(self.lam + 20.0 * math.sqrt(self.lam) + 60.0))
            ks = np.arange(top + 1)
            sf = stats.poisson.sf(ks, self.lam)
            hi = int(np.argmax(sf < tail)) + 2 if np.any(sf < tail) else top
            ks = ks[: hi + 1]
            return ks, stats.poisson.pmf(ks, self.lam)
        q = 1.0 - self.p
        hi = int(math.ceil(math.log(tail) / math.log(q))) + 2
        ks = np.arange(hi + 1)
        ps = self.p * q ** ks
        if self.family == "geometric1":
            ks = ks + 1
        return ks, ps

    def pr_zero(self) -> float:
        if self.finite_support:
            return float(self._ps[self._ks == 0].sum())
        if self.family == "geometric1":
            return 0.0
        if self.family == "geometric0":
            return self.p
        return math.exp(-self.lam)

    def pgf(self, z):
        z = np.asarray(z, dtype=np.float64)
        if self.family == "degenerate":
            return np.power(z, self.k)
        if self.family == "explicit":
            return np.sum(self._ps * np.power(z[..., None], self._ks), axis=-1)
        if self.family == "geometric1":
            return self.p * z / (1.0 - (1.0 - self.p) * z)
        if self.family == "geometric0":
            return self.p / (1.0 - (1.0 - self.p) * z)
        return np.exp(self.lam * (z - 1.0))

    def log_pgf(self, log_z):
        """``log P_N(exp(log_z))``, accurate when ``log_z`` is close to 0."""
        lz = np.asarray(log_z, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if self.family == "degenerate":
                return self.k * lz if self.k else np.zeros_like(lz)
            if self.family == "geometric1":
                r = (1.0 - self.p) / self.p
                return lz - np.log1p(-r * np.expm1(lz))
            if self.family == "geometric0":
                r = (1.0 - self.p) / self.p
                return -np.log1p(-r * np.expm1(lz))
            if self.family == "poisson":
                return self.lam * np.expm1(lz)
            ks, ps = self._ks, self._ps
            near = np.log1p(np.sum(ps * np.expm1(lz[..., None] * ks), axis=-1))
            terms = np.log(ps) + np.where(ks > 0, lz[..., None] * ks, 0.0)
            top = terms.max(axis=-1, keepdims=True)
            far = (top + np.log(np.sum(np.exp(terms - top), axis=-1, keepdims=True)))[..., 0]
            return np.where(lz > -0.5, near, far)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.family == "degenerate":
            return np.full(size, self.k, dtype=np.int64)
        if self.family == "explicit":
            return self._ks[_inverse_cdf(self._ps, rng.random(size))]
        if self.family == "geometric1":
            return rng.geometric(self.p, size=size)
        if self.family == "geometric0":
            return rng.geometric(self.p, size=size) - 1
        return rng.poisson(self.lam, size=size)

    def to_dict(self) -> dict:
        if self.family == "degenerate":
            return {"family": "degenerate", "k": int(self.k)}
        if self.family == "explicit":
            return {"family": "explicit", "pmf": [[int(k), float(w)] for k, w in self.pmf]}
        if self.family == "poisson":
            return {"family": "poisson", "lam": self.lam}
        return {"family": self.family, "p": self.p}


@dataclass(frozen=True)
class CountStats:
    mean: float
    variance: float
    factorial2: float
    second_moment: float

    def __iter__(self):
        return iter((self.mean, self.variance, self.factorial2, self.second_moment))

    def shifted(self, m: int) -> "CountStats":
        """Statistics of ``N + m``."""
        mean = self.mean + m
        second = self.second_moment + 2 * m * self.mean + m * m
        return CountStats(mean, self.variance, second - mean, second)


def count_stats(n: CountLaw) -> CountStats:
    """Mean, variance, ``E[N(N-1)]`` and ``E[N**2]`` in closed form."""
    if n.family == "degenerate":
        k = float(n.k)
        return CountStats(k, 0.0, k * (k - 1), k * k)
    if n.family == "explicit":
        ks = n._ks.astype(np.float64)
        mean = math.fsum(n._ps * ks)
        second = math.fsum(n._ps * ks * ks)
        fact2 = math.fsum(n._ps * ks * (ks - 1))
        var = math.fsum(n._ps * (ks - mean) ** 2)
        return CountStats(mean, var, fact2, second)
    if n.family == "geometric1":
        p, q = n.p, 1.0 - n.p
        return CountStats(1 / p, q / p**2, 2 * q / p**2, (2 - p) / p**2)
    if n.family == "geometric0":
        p, q = n.p, 1.0 - n.p
        mean, var = q / p, q / p**2
        return CountStats(mean, var, 2 * q * q / p**2, var + mean * mean)
    lam = n.lam
    return CountStats(lam, lam, lam * lam, lam + lam * lam)


def mean_n_log_plus(n: CountLaw) -> float:
    """``E[N log+ N]`` by summation over the (truncated) pmf."""
    ks, ps = n.pmf_table()
    ks = ks.astype(np.float64)
    vals = np.where(ks > 1, ks * np.log(np.maximum(ks, 1.0)), 0.0)
    return math.fsum(ps * vals)


# ---------------------------------------------------------------------------
# atom algebra


@njit(cache=True)
def _greedy_merge(locs, masses, delta):
    n = locs.size
    out_l = np.empty(n)
    out_m = np.empty(n)
    deficit = 0.0
    i = 0
    j = 0
    while i < n:
        start = locs[i]
        k = i
        mass = 0.0
        first = 0.0
        while k < n and locs[k] - start <= delta:
            mass += masses[k]
            first += masses[k] * locs[k]
            k += 1
        if k - i == 1:
            out_l[j] = locs[i]
        else:
            centre = first / mass
            if centre < locs[i]:
                centre = locs[i]
            elif centre > locs[k - 1]:
                centre = locs[k - 1]
            for r in range(i, k):
                deficit += masses[r] * (locs[r] - centre) ** 2
            out_l[j] = centre
        out_m[j] = mass
        j += 1
        i = k
    return out_l[:j], out_m[:j], deficit


def merge_atoms(m: DiscreteMeasure, delta: float) -> tuple[DiscreteMeasure, float]:
    """Merge runs of adjacent atoms spanning at most ``delta``.

    Each run collapses to one atom at its mass-weighted mean, so total mass and
    the mean are kept.  Returns the merged measure and the second-moment deficit
    (the total within-run variance that was lost).
    """
    if not delta > 0:
        raise ValueError("merge delta must be positive")
    if m.size < 2 or np.min(np.diff(m.locs)) > delta:
        return m, 0.0
    locs, masses, deficit = _greedy_merge(m.locs, m.masses, float(delta))
    return DiscreteMeasure._raw(locs, masses), float(deficit)


def merge_to_cap(
    m: DiscreteMeasure, delta: float, cap: int = DEFAULT_ATOM_CAP
) -> tuple[DiscreteMeasure, float, float]:
    """Merge with ``delta``, doubling it until at most ``cap`` atoms remain.

    Returns ``(measure, deficit, delta_used)``.
    """
    out, deficit = merge_atoms(m, delta)
    while out.size > cap:
        delta *= 2.0
        out, deficit = merge_atoms(m, delta)
    return out, deficit, delta


def scale(m: DiscreteMeasure, c: float) -> DiscreteMeasure:
    """Law of ``c X``."""
    if c < 0:
        raise NegativeLocation("scale factor must be nonnegative")
    if c == 0:
        return DiscreteMeasure.point(0.0)
    return DiscreteMeasure._raw(m.locs * c, m.masses)


def convolve(a: DiscreteMeasure, b: DiscreteMeasure) -> DiscreteMeasure:
    """Law of ``X + Y`` for independent ``X ~ a`` and ``Y ~ b``."""
    if a.size == 1:
        return DiscreteMeasure._raw(b.locs + a.locs[0], b.masses)
    if b.size == 1:
        return DiscreteMeasure._raw(a.locs + b.locs[0], a.masses)
    locs = np.add.outer(a.locs, b.locs).ravel()
    masses = np.multiply.outer(a.masses, b.masses).ravel()
    return _dedupe(locs, masses)


def product_law(t: DiscreteMeasure, x: DiscreteMeasure) -> DiscreteMeasure:
    """Law of ``T X`` for independent ``T ~ t`` and ``X ~ x``."""
    locs = np.multiply.outer(t.locs, x.locs).ravel()
    masses = np.multiply.outer(t.masses, x.masses).ravel()
    return _dedupe(locs, masses)


def mixture(parts: Sequence[tuple[float, DiscreteMeasure]]) -> DiscreteMeasure:
    parts = [(w, m) for w, m in parts if w > 0]
    locs = np.concatenate([m.locs for _, m in parts])
    masses = np.concatenate([w * m.masses for w, m in parts])
    return _dedupe(locs, masses)


def _renormalised(m: DiscreteMeasure) -> DiscreteMeasure:
    total = float(np.sum(m.masses))
    if total == 1.0:
        return m
    return DiscreteMeasure._raw(m.locs, m.masses / total)


# Capped iteration merges atoms on a lattice that is uniform in log(x + x0):
# the LST error from merging atoms near x scales with (spread / x)**2, so
# relative spacing spends the atom budget where it matters.

DEFAULT_LATTICE_WIDTH = 1e-5


@njit(cache=True)
def _lattice_bin(locs, masses, x0, width, k0, nb, acc_m, acc_1, acc_2):
    inv = 1.0 / width
    for i in range(locs.size):
        x = locs[i]
        k = min(max(int(math.floor(math.log(x + x0) * inv)) - k0, 0), nb - 1)
        w = masses[i]
        acc_m[k] += w
        acc_1[k] += w * x
        acc_2[k] += w * x * x


@njit(cache=True)
def _lattice_pairs(al, am, bl, bm, x0, width, k0, nb, acc_m, acc_1, acc_2):
    inv = 1.0 / width
    for i in range(al.size):
        for j in range(bl.size):
            x = al[i] + bl[j]
            k = min(max(int(math.floor(math.log(x + x0) * inv)) - k0, 0), nb - 1)
            w = am[i] * bm[j]
            acc_m[k] += w
            acc_1[k] += w * x
            acc_2[k] += w * x * x


class _Lattice:
    """Bins atoms on a log-spaced lattice whose width doubles until under a cap."""

    def __init__(self, x0: float, width: float, nbins: int = 0):
        self.x0 = x0
        self.width = width
        self.k0 = int(math.floor(math.log(x0) / width))
        self.nbins = nbins

    def sized_for(self, top: float) -> "_Lattice":
        nb = int(math.floor(math.log(top + self.x0) / self.width)) - self.k0 + 2
        return _Lattice(self.x0, self.width, nb)

    def coarser(self) -> "_Lattice":
        return _Lattice(self.x0, 2.0 * self.width)

    def empty(self):
        return np.zeros(self.nbins), np.zeros(self.nbins), np.zeros(self.nbins)

    def finish(self, acc) -> tuple[DiscreteMeasure, float]:
        acc_m, acc_1, acc_2 = acc
        keep = np.flatnonzero(acc_m > 0)
        mass = acc_m[keep]
        locs = acc_1[keep] / mass
        deficit = np.maximum(acc_2[keep] - acc_1[keep] * locs, 0.0).sum()
        return DiscreteMeasure._raw(locs, mass), float(deficit)


class _Merger:
    """Applies capped merging after each operation and tallies the deficit.

    With ``delta=None`` every operation is exact.  Otherwise ``delta`` is the
    starting relative lattice width and results above ``cap`` atoms are binned.
    """

    def __init__(self, delta, cap, pair_budget, x0=1e-12):
        self.delta = delta
        self.cap = cap
        self.pair_budget = pair_budget
        self.x0 = x0
        self.deficit = 0.0

    def _fit(self, m: DiscreteMeasure, cap: int, lattice: _Lattice) -> DiscreteMeasure:
        while m.size > cap:
            lattice = lattice.coarser().sized_for(float(m.locs[-1]))
            acc = lattice.empty()
            _lattice_bin(m.locs, m.masses, lattice.x0, lattice.width, lattice.k0, lattice.nbins, *acc)
            m, d = lattice.finish(acc)
            self.deficit += d
        return m

    def _start(self, m: DiscreteMeasure, cap: int) -> _Lattice:
        # Skip lattice widths that certainly leave more than ``cap`` bins occupied.
        span = math.log(float(m.locs[-1]) + self.x0) - math.log(self.x0)
        width = self.delta
        while span / (2.0 * width) > 4.0 * cap:
            width *= 2.0
        return _Lattice(self.x0, width / 2.0)

    def __call__(self, m: DiscreteMeasure, cap=None) -> DiscreteMeasure:
        # Rounding errors in the total mass would compound through repeated
        # convolution, so every intermediate is renormalised.
        m = _renormalised(m)
        cap = cap or self.cap
        if self.delta is None or m.size <= cap:
            return m
        return self._fit(m, cap, self._start(m, cap))

    def convolve(self, a: DiscreteMeasure, b: DiscreteMeasure) -> DiscreteMeasure:
        if self.delta is None or a.size * b.size <= min(self.pair_budget, 4 * self.cap):
            return self(convolve(a, b))
        side = max(2, int(math.sqrt(self.pair_budget)))
        a, b = self(a, cap=side), self(b, cap=side)
        lattice = _Lattice(self.x0, self.delta).sized_for(float(a.locs[-1] + b.locs[-1]))
        acc = lattice.empty()
        _lattice_pairs(a.locs, a.masses, b.locs, b.masses, lattice.x0, lattice.width,
                       lattice.k0, lattice.nbins, *acc)
        out, d = lattice.finish(acc)
        self.deficit += d
        return self._fit(_renormalised(out), self.cap, lattice)


def _powers(y: DiscreteMeasure, top: int, merge: _Merger) -> list[DiscreteMeasure]:
    out = [DiscreteMeasure.point(0.0)]
    for _ in range(top):
        out.append(merge.convolve(out[-1], y))
    return out


def _weighted_sum_law(
    t: DiscreteMeasure,
    x: DiscreteMeasure,
    n: CountLaw,
    m: int = 0,
    b: Optional[DiscreteMeasure] = None,
    common_t: bool = False,
    delta: Optional[float] = None,
    cap: int = DEFAULT_ATOM_CAP,
    pair_budget: int = DEFAULT_PAIR_BUDGET,
) -> tuple[DiscreteMeasure, float]:
    """Law of the right-hand side, with optional capped merging.

    Returns the law and the total second-moment deficit caused by merging.
    """
    ks, ps = n.support()
    scale_hint = max(x.mean * max(t.mean, 1e-300), b.mean if b is not None else 0.0, 1e-300)
    merge = _Merger(delta, cap, pair_budget, x0=1e-9 * scale_hint)
    if common_t:
        powers = _powers(x, int(ks.max()) + m, merge)
        parts = []
        for tj, wj in zip(t.locs, t.masses):
            for k, pk in zip(ks, ps):
                parts.append((wj * pk, scale(powers[k + m], tj)))
    else:
        y = merge(product_law(t, x))
        powers = _powers(y, int(ks.max()) + m, merge)
        parts = [(pk, powers[k + m]) for k, pk in zip(ks, ps)]
    out = merge(mixture(parts))
    if b is not None:
        out = merge.convolve(out, b)
    return out, merge.deficit


def weighted_sum_law(
    t: DiscreteMeasure,
    x: DiscreteMeasure,
    n: CountLaw,
    m: int = 0,
    b: Optional[DiscreteMeasure] = None,
    common_t: bool = False,
) -> DiscreteMeasure:
    """Exact law of ``B + sum_{i<=N+m} T_i X_i`` (or ``T sum X_i`` if ``common_t``).

    ``N`` must have finite support.
    """
    return _weighted_sum_law(t, x, n, m, b, common_t)[0]
