import numpy as np
import pytest
from hypothesis import settings

from srtlab.dists import make_pareto_lattice
from srtlab.regvar import TailIndexFunction

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def pareto():
    cache = {}

    def get(alpha, h=1.0, K_table=1 << 16):
        key = (alpha, h, K_table)
        if key not in cache:
            cache[key] = make_pareto_lattice(TailIndexFunction(alpha), h=h, K_table=K_table)
        return cache[key]

    return get


def two_point(masses, k_min=1):
    from srtlab.dists import make_finite_law
    return make_finite_law(np.asarray(masses, dtype=float), k_min)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
