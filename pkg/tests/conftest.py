import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from geolab.groups import enumerate_closed_geodesics, preset

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def modular():
    return preset("modular")


@pytest.fixture(scope="session")
def modular_census_8(modular):
    return enumerate_closed_geodesics(modular, 8.0, primitive_only=True)


@pytest.fixture(scope="session")
def modular_census_10(modular):
    return enumerate_closed_geodesics(modular, 10.0, primitive_only=True)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS):
        terminalreporter.write_line(line)
