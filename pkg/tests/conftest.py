import numpy as np
from hypothesis import settings, strategies as st

from pfp import mk_discrete

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

# One line per acceptance criterion, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@st.composite
def measures(draw, max_atoms: int = 5, lo: float = 0.0, hi: float = 5.0, positive_mean: bool = True):
    """Random finite discrete measures on [lo, hi].

    Locations are either exactly ``lo`` or at least ``lo + 1e-6``, so moments
    never underflow.
    """
    k = draw(st.integers(1, max_atoms))
    loc = st.one_of(st.just(lo), st.floats(lo + 1e-6, hi, allow_nan=False))
    locs = draw(st.lists(loc, min_size=k, max_size=k))
    raw = draw(st.lists(st.floats(0.05, 1.0), min_size=k, max_size=k))
    w = np.asarray(raw) / np.sum(raw)
    if positive_mean and max(locs) == 0:
        locs[0] = hi if hi > 0 else 1.0
    return mk_discrete(zip(locs, w))
