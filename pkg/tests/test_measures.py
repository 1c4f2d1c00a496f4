import itertools
import math

import numpy as np
import pytest
from conftest import measures
from hypothesis import given, strategies as st

from pfp import CountLaw, MomentPair, count_stats, eckberg_two_atom, length_biased, merge_atoms, mk_discrete, moment
from pfp.errors import (
    InfiniteSupportCount,
    InvalidCountLaw,
    InvalidMoments,
    MassNotNormalized,
    NegativeLocation,
    NonPositiveMass,
    ZeroMean,
)
from pfp.measures import _weighted_sum_law, merge_to_cap, weighted_sum_law

TWO = [(0.3, 0.5), (0.7, 0.5)]


def brute_force_law(t, x, counts, m=0, b=None, common_t=False):
    """Enumerate every outcome of B + sum T_i X_i (small inputs only)."""
    out = {}
    b_atoms = b.atoms if b is not None else [(0.0, 1.0)]
    for k, pk in counts:
        total = k + m
        if common_t:
            for (tj, wt), xs, (bv, wb) in itertools.product(t.atoms, itertools.product(x.atoms, repeat=total), b_atoms):
                v = bv + tj * sum(xv for xv, _ in xs)
                w = pk * wt * wb * math.prod(wx for _, wx in xs)
                out[round(v, 12)] = out.get(round(v, 12), 0.0) + w
        else:
            pairs = [(tj * xv, wt * wx) for tj, wt in t.atoms for xv, wx in x.atoms]
            for combo, (bv, wb) in itertools.product(itertools.product(pairs, repeat=total), b_atoms):
                v = bv + sum(y for y, _ in combo)
                w = pk * wb * math.prod(wy for _, wy in combo)
                out[round(v, 12)] = out.get(round(v, 12), 0.0) + w
    return out


def as_rounded(m):
    out = {}
    for x, w in m.atoms:
        out[round(x, 12)] = out.get(round(x, 12), 0.0) + w
    return out


# ---------------------------------------------------------------------------
# construction


def test_mk_discrete_two_atoms():
    m = mk_discrete(TWO)
    assert m.size == 2
    assert m.mean == pytest.approx(0.5, abs=1e-15)


def test_mk_discrete_merges_duplicates():
    assert mk_discrete([(1.0, 0.4), (1.0, 0.6)]).atoms == [(1.0, 1.0)]


@pytest.mark.parametrize(
    "atoms, exc",
    [
        ([(0.5, 0.5), (0.5, 0.4)], MassNotNormalized),
        ([(-0.1, 1.0)], NegativeLocation),
        ([(0.1, 0.0), (0.2, 1.0)], NonPositiveMass),
        ([], MassNotNormalized),
    ],
)
def test_mk_discrete_rejects(atoms, exc):
    with pytest.raises(exc):
        mk_discrete(atoms)


def test_atoms_are_sorted_and_read_only():
    m = mk_discrete([(2.0, 0.25), (0.0, 0.25), (1.0, 0.5)])
    assert m.locs.tolist() == [0.0, 1.0, 2.0]
    with pytest.raises(ValueError):
        m.locs[0] = 5.0


# ---------------------------------------------------------------------------
# moments


def test_moment_examples():
    assert moment(mk_discrete(TWO), 2) == pytest.approx(0.29, abs=1e-15)
    assert moment(mk_discrete([(0.25, 1.0)]), 0.5) == 0.5
    assert moment(mk_discrete([(0.0, 1.0)]), 0) == 1.0  # 0**0 == 1
    for c, k in [(0.7, 3), (2.0, 1.5), (1.3, 0)]:
        assert moment(mk_discrete([(c, 1.0)]), k) == pytest.approx(c ** k, rel=1e-15)


def test_length_biased_examples():
    lb = length_biased(mk_discrete(TWO))
    assert lb.locs.tolist() == [0.3, 0.7]
    assert np.allclose(lb.masses, [0.3, 0.7], atol=1e-15)
    assert lb.mean == pytest.approx(0.58, abs=1e-15)
    assert length_biased(mk_discrete([(0.4, 1.0)])).atoms == [(0.4, 1.0)]
    assert length_biased(mk_discrete([(0.0, 0.5), (0.6, 0.5)])).atoms == [(0.6, 1.0)]
    with pytest.raises(ZeroMean):
        length_biased(mk_discrete([(0.0, 1.0)]))


def test_eckberg_two_atom_examples():
    assert eckberg_two_atom(MomentPair(1.0, 2.0)).atoms == [(0.0, 0.5), (2.0, 0.5)]
    assert eckberg_two_atom(MomentPair(1.5, 2.25)).atoms == [(1.5, 1.0)]
    e = eckberg_two_atom(MomentPair(1.0, 25 / 21))
    assert e.locs[0] == 0.0
    assert e.locs[1] == pytest.approx(25 / 21, rel=1e-15)
    assert e.masses[0] == pytest.approx(0.16, abs=1e-15)
    with pytest.raises(InvalidMoments):
        MomentPair(1.0, 0.5)
    with pytest.raises(InvalidMoments):
        MomentPair(0.0, 1.0)


@given(st.floats(0.01, 10.0), st.floats(0.0, 5.0))
def test_eckberg_two_atom_reproduces_moments(mu1, extra):
    mp = MomentPair(mu1, mu1 * mu1 * (1.0 + extra))
    e = eckberg_two_atom(mp)
    assert moment(e, 1) == pytest.approx(mp.mu1, rel=1e-12)
    assert moment(e, 2) == pytest.approx(mp.mu2, rel=1e-12)


@given(measures(positive_mean=True))
def test_length_biased_mean_is_moment_ratio(t):
    assert length_biased(t).mean == pytest.approx(moment(t, 2) / moment(t, 1), rel=1e-12)


@given(measures(), st.floats(0.01, 10.0), st.sampled_from([0, 1, 2, 3, 0.5, 1.7]))
def test_moment_scales_through_weighted_sum(m, c, k):
    scaled = weighted_sum_law(mk_discrete([(c, 1.0)]), m, CountLaw.degenerate(1))
    assert moment(scaled, k) == pytest.approx(c ** k * moment(m, k), rel=1e-12, abs=1e-300)


# ---------------------------------------------------------------------------
# count laws


@pytest.mark.parametrize(
    "law, expected",
    [
        (CountLaw.geometric1(0.5), (2.0, 2.0, 4.0, 6.0)),
        (CountLaw.degenerate(3), (3.0, 0.0, 6.0, 9.0)),
        (CountLaw.poisson(2.0), (2.0, 2.0, 4.0, 6.0)),
        (CountLaw.geometric0(0.25), (3.0, 12.0, 18.0, 21.0)),
        (CountLaw.explicit({1: 0.5, 3: 0.5}), (2.0, 1.0, 3.0, 5.0)),
    ],
)
def test_count_stats_examples(law, expected):
    assert tuple(count_stats(law)) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("law", [CountLaw.geometric1(0.3), CountLaw.geometric0(0.6), CountLaw.poisson(3.7)])
def test_count_stats_match_truncated_sums(law):
    ks, ps = law.pmf_table()
    k = ks.astype(float)
    mean = math.fsum(ps * k)
    fact = math.fsum(ps * k * (k - 1))
    st_ = count_stats(law)
    assert st_.mean == pytest.approx(mean, rel=1e-12)
    assert st_.factorial2 == pytest.approx(fact, rel=1e-12)
    assert st_.variance == pytest.approx(fact + mean - mean * mean, rel=1e-10)
    assert math.fsum(ps) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize(
    "build",
    [
        lambda: CountLaw.geometric1(1.0),
        lambda: CountLaw.geometric0(0.0),
        lambda: CountLaw.poisson(-1.0),
        lambda: CountLaw.degenerate(-1),
        lambda: CountLaw.explicit({1: 0.5}),
        lambda: CountLaw.explicit({1.5: 1.0}),
        lambda: CountLaw("binomial"),
    ],
)
def test_count_law_rejects(build):
    with pytest.raises(InvalidCountLaw):
        build()


def test_infinite_support_has_no_exact_support():
    with pytest.raises(InfiniteSupportCount):
        CountLaw.poisson(1.0).support()


# ---------------------------------------------------------------------------
# weighted sums


def test_weighted_sum_examples():
    x = mk_discrete([(0.0, 0.5), (2.0, 0.5)])
    out = weighted_sum_law(mk_discrete([(0.5, 1.0)]), x, CountLaw.degenerate(2))
    assert out.atoms == [(0.0, 0.25), (1.0, 0.5), (2.0, 0.25)]
    assert weighted_sum_law(mk_discrete([(0.5, 1.0)]), x, CountLaw.degenerate(0)).atoms == [(0.0, 1.0)]
    out = weighted_sum_law(mk_discrete([(1.0, 1.0)]), mk_discrete([(1.0, 1.0)]), CountLaw.degenerate(1),
                           b=mk_discrete([(3.0, 1.0)]))
    assert out.atoms == [(4.0, 1.0)]


@pytest.mark.parametrize("common_t", [False, True])
@pytest.mark.parametrize("m", [0, 1])
def test_weighted_sum_matches_enumeration(common_t, m):
    t = mk_discrete([(0.2, 0.3), (0.9, 0.7)])
    x = mk_discrete([(0.0, 0.4), (1.0, 0.35), (2.5, 0.25)])
    b = mk_discrete([(0.1, 0.5), (0.6, 0.5)])
    counts = [(0, 0.2), (1, 0.5), (2, 0.3)]
    n = CountLaw.explicit(dict(counts))
    got = as_rounded(weighted_sum_law(t, x, n, m=m, b=b, common_t=common_t))
    want = brute_force_law(t, x, counts, m=m, b=b, common_t=common_t)
    assert got.keys() == want.keys()
    for key in want:
        assert got[key] == pytest.approx(want[key], abs=1e-14)


def _analytic_moments(t, x, n, m, b, common_t):
    a = count_stats(n).shifted(m)
    eb = b.mean if b is not None else 0.0
    eb2 = b.second_moment if b is not None else 0.0
    mean_sum = a.mean * t.mean * x.mean
    if common_t:
        sum2 = t.second_moment * (a.mean * x.second_moment + a.factorial2 * x.mean ** 2)
    else:
        sum2 = a.mean * t.second_moment * x.second_moment + a.factorial2 * (t.mean * x.mean) ** 2
    return eb + mean_sum, eb2 + 2 * eb * mean_sum + sum2


@given(
    measures(max_atoms=3, hi=1.0),
    measures(max_atoms=3, hi=3.0),
    st.dictionaries(st.integers(0, 3), st.floats(0.05, 1.0), min_size=1, max_size=3),
    st.integers(0, 2),
    st.one_of(st.none(), measures(max_atoms=2, hi=2.0)),
    st.booleans(),
)
def test_weighted_sum_moments_match_expansion(t, x, raw, m, b, common_t):
    total = sum(raw.values())
    n = CountLaw.explicit({k: w / total for k, w in raw.items()})
    out = weighted_sum_law(t, x, n, m=m, b=b, common_t=common_t)
    mean, second = _analytic_moments(t, x, n, m, b, common_t)
    assert moment(out, 0) == pytest.approx(1.0, abs=1e-12)
    assert out.mean == pytest.approx(mean, rel=1e-10, abs=1e-300)
    assert out.second_moment == pytest.approx(second, rel=1e-10, abs=1e-300)


def test_capped_weighted_sum_keeps_mean_and_reports_deficit():
    t = mk_discrete([(0.3, 0.5), (0.7, 0.5)])
    x = mk_discrete([(0.1 * i, 0.01) for i in range(100)])
    n = CountLaw.degenerate(3)
    exact = weighted_sum_law(t, x, n)
    capped, deficit = _weighted_sum_law(t, x, n, delta=1e-6, cap=500)
    assert capped.size <= 500 < exact.size
    assert capped.mean == pytest.approx(exact.mean, rel=1e-12)
    assert deficit >= 0
    assert capped.second_moment + deficit == pytest.approx(exact.second_moment, rel=1e-10)


# ---------------------------------------------------------------------------
# merging


def test_merge_examples():
    merged, deficit = merge_atoms(mk_discrete([(1.0, 0.5), (1.0 + 1e-9, 0.5)]), 1e-6)
    assert merged.size == 1
    assert merged.locs[0] == pytest.approx(1.0 + 5e-10, abs=1e-15)
    merged, _ = merge_atoms(mk_discrete([(0.0, 0.25), (1e-7, 0.25), (1.0, 0.5)]), 1e-6)
    assert merged.locs == pytest.approx([5e-8, 1.0], abs=1e-20)
    assert merged.masses == pytest.approx([0.5, 0.5], abs=1e-15)
    m = mk_discrete(TWO)
    assert merge_atoms(m, 1e-3)[0] is m
    with pytest.raises(ValueError):
        merge_atoms(m, 0.0)


@given(measures(max_atoms=12, hi=1.0), st.floats(1e-4, 0.5))
def test_merge_preserves_mass_and_mean(m, delta):
    merged, deficit = merge_atoms(m, delta)
    assert merged.size <= m.size
    assert moment(merged, 0) == pytest.approx(moment(m, 0), abs=1e-14)
    assert merged.mean == pytest.approx(m.mean, abs=1e-14)
    assert deficit >= 0
    assert merged.second_moment + deficit == pytest.approx(m.second_moment, abs=1e-12)


def test_merge_to_cap_doubles_delta():
    m = mk_discrete([(i / 1000, 1 / 1000) for i in range(1000)])
    out, deficit, used = merge_to_cap(m, 1e-6, cap=100)
    assert out.size <= 100
    assert used > 1e-6
    assert out.mean == pytest.approx(m.mean, rel=1e-14)
