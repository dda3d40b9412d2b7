import functools

import pytest
from hypothesis import settings

from plaplab.problem import ProblemParams
from plaplab.shooter import survey
from plaplab.variational import classify

settings.register_profile("plaplab", deadline=None, max_examples=40)
settings.load_profile("plaplab")


@functools.lru_cache(maxsize=None)
def _classified(p, q, N=1):
    sv = survey(ProblemParams(p, q, N))
    return sv, tuple(classify(sv.cone))


@pytest.fixture(scope="session")
def classified():
    """``classified(p, q, N=1)`` -> (survey, classified cone solutions), cached."""
    return _classified


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
