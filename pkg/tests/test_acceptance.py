"""The fifteen acceptance criteria at their stated thresholds and time budgets.

Each test prints one ``[PASS]``/``[FAIL]`` line; the same lines are repeated in
the pytest terminal summary. Run directly (``python tests/test_acceptance.py``)
to get only the table.
"""

import time

import pytest

from oscillametric import acceptance as A

# seconds allowed per criterion
BUDGET = {1: 1, 2: 5, 3: 30, 4: 10, 5: 10, 6: 10, 7: 20, 8: 60, 9: 20, 10: 1, 11: 30, 12: 10, 13: 1, 14: 30}
SUITE_BUDGET = 120

LINES = {}


@pytest.fixture(scope="module")
def first_run():
    timings = {}
    t0 = time.perf_counter()
    crits = A.core_report("default", A.DEFAULT_SEED, timings)
    return crits, timings, time.perf_counter() - t0


def _record(c, seconds):
    line = f"{c.line()}  ({seconds:.1f}s)"
    LINES[c.number] = line
    print(line)
    if not c.passed:
        print(f"    measured: {c.measured}")
        if c.notes:
            print(f"    notes: {c.notes}")


@pytest.mark.parametrize("number", range(1, 15))
def test_criterion(number, first_run):
    crits, timings, _ = first_run
    c = crits[number - 1]
    assert c.number == number
    _record(c, timings[number])
    assert c.passed, f"criterion {number} failed: {c.measured}"
    assert timings[number] <= BUDGET[number]


def test_criterion_15_determinism(first_run):
    crits, _, elapsed = first_run
    t0 = time.perf_counter()
    c = A.c15_determinism("default", A.DEFAULT_SEED, first=crits)
    total = elapsed + time.perf_counter() - t0
    _record(c, total)
    assert c.passed
    assert total <= SUITE_BUDGET


def test_tight_fd_profile_fails_curvature_checks():
    tight = A.resolve_profile("tight-fd")
    assert not A.c02_christoffel(tight, A.DEFAULT_SEED).passed
    assert not A.c03_ricci_identities(tight, A.DEFAULT_SEED).passed


if __name__ == "__main__":
    for crit in A.verify_all():
        print(crit.line())
