import pytest

from entigraph.fixtures import consult_corpus, consult_kg
from entigraph.mitigation import build_response_knowledge
from entigraph.synthetic import make_world


@pytest.fixture(scope="session")
def kg():
    return consult_kg()


@pytest.fixture(scope="session")
def rk():
    return build_response_knowledge(consult_corpus())


@pytest.fixture(scope="session")
def world():
    return make_world(seed=0)


@pytest.fixture(scope="session")
def world_rk(world):
    return build_response_knowledge(world.corpus)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
