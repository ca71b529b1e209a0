import numpy as np
import pytest

from efficient_ppe import (
    EquilibriumConfig,
    deviation_stats,
    efficient_frontier,
    make_contest,
    make_modified_pd,
    make_table3,
)


@pytest.fixture(scope="session")
def pd_game():
    return make_modified_pd()


@pytest.fixture(scope="session")
def pd_frontier(pd_game):
    return efficient_frontier(pd_game)


@pytest.fixture(scope="session")
def pd_stats(pd_game, pd_frontier):
    return deviation_stats(pd_game, pd_frontier)


@pytest.fixture(scope="session")
def pd_cfg(pd_game):
    return EquilibriumConfig.build(pd_game, 0.8, v0=np.array([2.0, 2.0]))


@pytest.fixture(scope="session")
def contest_game():
    return make_contest(m=401)


@pytest.fixture(scope="session")
def contest_cfg(contest_game):
    return EquilibriumConfig.build(contest_game, 0.8, m=401)


@pytest.fixture(scope="session")
def table3_game():
    return make_table3()


ACCEPTANCE = {}


def record(criterion: str, passed: bool, detail: str = "") -> None:
    """Store an acceptance result for the end-of-run summary."""
    ACCEPTANCE[criterion] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.rstrip("abc")), k)):
        passed, detail = ACCEPTANCE[key]
        verdict = {True: "PASS", False: "FAIL", None: "NOT REPRODUCED"}[passed]
        terminalreporter.write_line(f"criterion {key}: {verdict}  {detail}")
