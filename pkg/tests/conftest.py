import os

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running numerical experiment (minutes)")


@pytest.fixture(scope="session")
def datum():
    from chdisp.hopf import InitialDatum, Sech2Profile

    return InitialDatum(Sech2Profile(), nu=1.2, eps=0.1)


@pytest.fixture(scope="session")
def modulation(datum):
    from chdisp.whitham import _toolkit

    return _toolkit(datum)


@pytest.fixture(scope="session")
def cache_dir():
    """Shared CH run cache; override with DSL_CACHE_DIR."""
    return os.environ.get("DSL_CACHE_DIR", os.path.join(os.path.dirname(__file__), "..", ".dsl_cache"))
