"""Monte Carlo for the weighted branching recursion and one-sided stable draws.

A sample of ``X`` is built by unrolling the right-hand side as a tree: every
node draws its count (and ``B``), and each child carries the product of the
``T`` factors on its path as a weight.  A node at the depth limit, or whose
weight has fallen below ``prune_weight``, is closed off by the constant
``mu1``.  Closing a node at weight ``W`` keeps the mean exact and removes
``W**2 Var(X)`` from the variance, so with ``q = E[sum of leaf W**2]`` the raw
sample variance ``v`` satisfies ``Var(X) = v / (1 - q)``.  :func:`mc_estimate`
reports both ``v`` (``var_raw``) and the corrected value (``var_hat``).

Samples are generated in fixed-size chunks, each with its own seed derived
from ``(seed, chunk index)``, so results do not depend on how chunks are
scheduled.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from numba import njit

from .conditions import ProblemSpec
from .errors import AlphaOutOfRange
from .measures import DiscreteMeasure

CHUNK = 2048
DEFAULT_PRUNE_WEIGHT = 0.05

_DEGENERATE, _EXPLICIT, _GEOMETRIC1, _GEOMETRIC0, _POISSON = range(5)
_FAMILY_CODES = {
    "degenerate": _DEGENERATE,
    "explicit": _EXPLICIT,
    "geometric1": _GEOMETRIC1,
    "geometric0": _GEOMETRIC0,
    "poisson": _POISSON,
}


@dataclass(frozen=True)
class McReport:
    n_samples: int
    depth: int
    mean_hat: float
    var_hat: float
    se_mean: float
    se_var: float
    seed: int
    var_raw: float = math.nan
    leaf_weight_sq: float = math.nan
    prune_weight: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# exact recursion (small depths)


def _draw_count(p: ProblemSpec, rng: np.random.Generator) -> int:
    return int(p.n.sample(rng, 1)[0]) + p.shift


def _draw(m: DiscreteMeasure, rng: np.random.Generator) -> float:
    return float(m.sample(rng, 1)[0])


def sample_once(p: ProblemSpec, depth: int, rng: np.random.Generator) -> float:
    """One draw of the depth-truncated recursion, expanded exactly.

    Cost grows like ``E[N+m]**depth``; use :func:`mc_estimate` for deep trees.
    """
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    mu1 = p.target_mean()

    def expand(d: int) -> float:
        if d == 0:
            return mu1
        total = _draw(p.b, rng) if p.b is not None else 0.0
        k = _draw_count(p, rng)
        if p.kind.common_t:
            t = _draw(p.t, rng)
            total += t * math.fsum(expand(d - 1) for _ in range(k)) if t > 0 else 0.0
        else:
            for _ in range(k):
                t = _draw(p.t, rng)
                if t > 0:
                    total += t * expand(d - 1)
        return total

    return expand(depth)


# ---------------------------------------------------------------------------
# pruned tree kernel


@njit(cache=True, inline="always")
def _pick(cdf):
    n = cdf.size
    if n == 1:
        return 0
    u = np.random.random()
    lo = 0
    hi = n - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cdf[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True, inline="always")
def _count(code, k, p, lam, ks, cdf):
    if code == 0:
        return k
    if code == 1:
        return ks[_pick(cdf)]
    if code == 2:
        return np.random.geometric(p)
    if code == 3:
        return np.random.geometric(p) - 1
    return np.random.poisson(lam)


@njit(cache=True)
def _tree_chunk(seed, n, depth, prune, mu1, shift, common_t, code, k, p, lam, ks, kcdf,
                t_locs, t_cdf, has_b, b_locs, b_cdf, ws, ds, out, out_q):
    """Fill ``out``/``out_q``; returns False if the node stack overflowed."""
    np.random.seed(seed)
    cap = ws.size
    nt = t_locs.size
    nb = b_locs.size
    t0 = t_locs[0]
    for s in range(n):
        total = 0.0
        q = 0.0
        ws[0] = 1.0
        ds[0] = depth
        sp = 1
        while sp > 0:
            sp -= 1
            w = ws[sp]
            d = ds[sp]
            if w == 0.0:
                continue
            if d == 0 or w < prune:
                total += w * mu1
                q += w * w
                continue
            if has_b:
                total += w * (b_locs[0] if nb == 1 else b_locs[_pick(b_cdf)])
            kk = (k if code == 0 else _count(code, k, p, lam, ks, kcdf)) + shift
            if sp + kk > cap:
                return False
            if common_t:
                t = t_locs[_pick(t_cdf)]
                for _ in range(kk):
                    ws[sp] = w * t
                    ds[sp] = d - 1
                    sp += 1
            else:
                for _ in range(kk):
                    if nt == 1:
                        t = t0
                    else:
                        u = np.random.random()
                        j = 0
                        while j < nt - 1 and t_cdf[j] <= u:
                            j += 1
                        t = t_locs[j]
                    ws[sp] = w * t
                    ds[sp] = d - 1
                    sp += 1
        out[s] = total
        out_q[s] = q
    return True


def _cdf(masses: np.ndarray) -> np.ndarray:
    c = np.cumsum(masses)
    c[-1] = 1.0
    return c


def _chunk_seed(seed: int, chunk: int) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=(chunk,))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def simulate_tree(p: ProblemSpec, n_samples: int, depth: int, seed: int = 0,
                  prune_weight: float = DEFAULT_PRUNE_WEIGHT) -> tuple[np.ndarray, np.ndarray]:
    """Draws of the truncated recursion and, per draw, the sum of squared leaf weights."""
    n = p.n
    code = _FAMILY_CODES[n.family]
    if n.finite_support:
        ks, kps = n.support()
        ks = ks.astype(np.int64)
        kcdf = _cdf(kps)
    else:
        ks, kcdf = np.zeros(1, dtype=np.int64), np.ones(1)
    b = p.b if p.b is not None else DiscreteMeasure.point(0.0)
    args = (
        int(depth), float(prune_weight), float(p.target_mean()), int(p.shift), bool(p.kind.common_t),
        code, int(n.k), float(n.p), float(n.lam), ks, kcdf,
        p.t.locs, _cdf(p.t.masses), p.b is not None, b.locs, _cdf(b.masses),
    )
    out = np.empty(n_samples)
    out_q = np.empty(n_samples)
    stack = 4096
    for c, start in enumerate(range(0, n_samples, CHUNK)):
        stop = min(start + CHUNK, n_samples)
        # A chunk that outgrows the stack is redrawn from its own seed with a
        # larger stack, so the draws do not depend on the stack size.
        while not _tree_chunk(_chunk_seed(seed, c), stop - start, *args, np.empty(stack),
                              np.empty(stack, dtype=np.int64), out[start:stop], out_q[start:stop]):
            stack *= 4
    return out, out_q


def _pairwise_mean(x: np.ndarray) -> float:
    return math.fsum(x.tolist()) / x.size


def mc_estimate(p: ProblemSpec, n_samples: int = 100_000, depth: int = 40, seed: int = 0,
                prune_weight: float = DEFAULT_PRUNE_WEIGHT) -> McReport:
    """Monte Carlo mean and variance of the solution.

    ``prune_weight=0`` expands every node down to ``depth`` (exponential cost).
    """
    if n_samples < 2:
        raise ValueError("need at least two samples")
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    x, q = simulate_tree(p, n_samples, depth, seed, prune_weight)
    mean = _pairwise_mean(x)
    dev = x - mean
    m2 = math.fsum((dev * dev).tolist()) / n_samples
    m4 = math.fsum((dev ** 4).tolist()) / n_samples
    var_raw = m2 * n_samples / (n_samples - 1)
    qbar = _pairwise_mean(q)
    shrink = 1.0 - qbar
    if shrink > 1e-12:
        var_hat = var_raw / shrink
        se_var = math.sqrt(max(m4 - m2 * m2, 0.0) / n_samples) / shrink
    else:
        var_hat = var_raw
        se_var = math.sqrt(max(m4 - m2 * m2, 0.0) / n_samples)
    return McReport(
        n_samples=n_samples,
        depth=depth,
        mean_hat=mean,
        var_hat=var_hat,
        se_mean=math.sqrt(var_raw / n_samples),
        se_var=se_var,
        seed=seed,
        var_raw=var_raw,
        leaf_weight_sq=qbar,
        prune_weight=prune_weight,
    )


# ---------------------------------------------------------------------------
# one-sided stable law


def sample_positive_stable(alpha: float, rng: np.random.Generator, size=None):
    """Draws ``S`` with ``E[exp(-s S)] = exp(-s**alpha)``, ``0 < alpha < 1``.

    Uses the Kanter / Chambers-Mallows-Stuck representation with one uniform
    angle on (0, pi) and one unit exponential.
    """
    if not 0 < alpha < 1:
        raise AlphaOutOfRange(f"alpha must lie in (0,1), got {alpha!r}")
    u = rng.uniform(0.0, math.pi, size)
    e = rng.exponential(1.0, size)
    a = np.sin(alpha * u) / np.sin(u) ** (1.0 / alpha)
    b = (np.sin((1.0 - alpha) * u) / e) ** ((1.0 - alpha) / alpha)
    out = a * b
    return float(out) if size is None else out
