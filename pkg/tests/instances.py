"""Random instances that satisfy (or deliberately break) the solvability conditions."""

from __future__ import annotations

import math

import numpy as np

from pfp.conditions import Kind, ProblemSpec
from pfp.measures import CountLaw, DiscreteMeasure, mk_discrete


def random_measure(rng: np.random.Generator, k: int, lo: float, hi: float, zero_prob: float = 0.0) -> DiscreteMeasure:
    locs = rng.uniform(lo, hi, size=k)
    if zero_prob and rng.random() < zero_prob:
        locs[0] = 0.0
    w = rng.dirichlet(np.ones(k))
    w = np.maximum(w, 1e-3)
    w /= w.sum()
    return mk_discrete(zip(locs, w))


def count_with_mean(rng: np.random.Generator, mean: float, family: str | None = None) -> CountLaw:
    """A count law with the exact mean ``mean`` (``mean >= 0``)."""
    if mean == 0:
        return CountLaw.degenerate(0)
    choices = ["explicit", "poisson", "geometric0"] + (["geometric1"] if mean > 1 else [])
    family = family or choices[rng.integers(len(choices))]
    if family == "geometric1":
        return CountLaw.geometric1(1.0 / mean)
    if family == "geometric0":
        return CountLaw.geometric0(1.0 / (1.0 + mean))
    if family == "poisson":
        return CountLaw.poisson(mean)
    a = math.floor(mean)
    frac = mean - a
    if frac < 1e-12:
        return CountLaw.degenerate(a)
    if a >= 1 and rng.random() < 0.5:
        # spread over three values with the same mean
        eps = (1 - frac) * rng.uniform(0.2, 0.9)
        return CountLaw.explicit({a - 1: eps / 2, a: 1 - frac - eps, a + 1: frac + eps / 2})
    return CountLaw.explicit({a: 1 - frac, a + 1: frac})


def random_t(rng: np.random.Generator, mean_lo: float, mean_hi: float, k: int | None = None,
             zero_prob: float = 0.0) -> DiscreteMeasure:
    """T with atoms in (0, 1) and mean in [mean_lo, mean_hi]."""
    k = k or int(rng.integers(1, 4))
    target = rng.uniform(mean_lo, mean_hi)
    base = random_measure(rng, k, 0.2, 1.0, zero_prob)
    scale = target / base.mean
    locs = np.minimum(base.locs * scale, 0.98)
    return mk_discrete(zip(locs, base.masses))


def homogeneous(rng: np.random.Generator, kind: str = "homogeneous", mu: float | None = None,
                family: str | None = None) -> ProblemSpec:
    t = random_t(rng, 0.3, 0.75)
    n = count_with_mean(rng, 1.0 / t.mean, family)
    mu = mu if mu is not None else float(rng.uniform(0.5, 2.0))
    return ProblemSpec(kind, n, t, mu)


def floored(rng: np.random.Generator, m: int | None = None, mu: float | None = None) -> ProblemSpec:
    m = m or int(rng.integers(1, 3))
    hi = 0.8 if m == 1 else 1.0 / m
    t = random_t(rng, 0.6 * hi, hi)
    if t.mean > 1.0 / m:
        t = mk_discrete(zip(t.locs / (t.mean * m), t.masses))
    n_mean = max((1 - m * t.mean) / t.mean, 0.0)
    n = count_with_mean(rng, n_mean)
    mu = mu if mu is not None else float(rng.uniform(0.5, 2.0))
    return ProblemSpec(Kind.FLOORED, n, t, mu, m=m)


def nonhomogeneous(rng: np.random.Generator, kind: str = "nonhomogeneous") -> ProblemSpec:
    t = random_t(rng, 0.2, 0.6)
    product = rng.uniform(0.3, 0.8)
    n = count_with_mean(rng, product / t.mean)
    b = random_measure(rng, int(rng.integers(1, 4)), 0.0, 2.0, zero_prob=0.3)
    if b.mean == 0:
        b = mk_discrete([(1.0, 1.0)])
    return ProblemSpec(kind, n, t, None, b=b)


def conforming(rng: np.random.Generator, kind: str) -> ProblemSpec:
    if kind in ("homogeneous", "common_t"):
        return homogeneous(rng, kind)
    if kind == "floored":
        return floored(rng)
    return nonhomogeneous(rng, kind)


def premise_pair(rng: np.random.Generator) -> tuple[CountLaw, DiscreteMeasure]:
    """(N, T) with E[N]E[T] = 1 and 0 < E[T^2] < E[T] < 1, T possibly with an atom at 0."""
    k = int(rng.integers(1, 5))
    locs = rng.uniform(0.0, 1.0, size=k)
    if rng.random() < 0.3:
        locs[0] = 0.0
    if np.all(locs == 0):
        locs[-1] = 0.5
    w = rng.dirichlet(np.ones(k))
    t = mk_discrete(zip(locs, w))
    if t.mean < 0.02:
        t = mk_discrete(zip(np.minimum(t.locs * 0.3 / t.mean, 0.99), t.masses))
    mean = 1.0 / t.mean
    a = math.floor(mean)
    frac = mean - a
    pmf = {a: 1 - frac, a + 1: frac} if frac > 0 else {a: 1.0}
    return CountLaw.explicit(pmf), t
