import pathlib

import pytest

from blocknav import fixtures

FIXTURE_DIR = pathlib.Path(__file__).parent / "fixtures"


@pytest.hookimpl(tryfirst=True, hookwrapper=True)
def pytest_runtest_makereport(item, call):
    # Stash phase outcomes on the item so teardown-time fixtures (the
    # acceptance suite's verdict printer) can see whether the test passed.
    outcome = yield
    rep = outcome.get_result()
    setattr(item, "rep_" + rep.when, rep)


@pytest.fixture(scope="session")
def model28():
    return fixtures.model_28()


@pytest.fixture(scope="session")
def truck():
    return fixtures.lego_multi()


@pytest.fixture(scope="session")
def model28_path() -> str:
    return str(FIXTURE_DIR / "model-28.doc")


@pytest.fixture(scope="session")
def truck_path() -> str:
    return str(FIXTURE_DIR / "truck.doc")
