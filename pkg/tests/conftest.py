import math
import sys

import pytest
from hypothesis import HealthCheck, settings

from grazesim.kinematics import IncidenceSpec
from grazesim.potential import PotentialParams

# compiled kernels make the first example slow; deadlines are meaningless here
settings.register_profile(
    "default", deadline=None, max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

THETA = 0.506 * math.pi
E_REF = 2.0e5  # meV


@pytest.fixture(scope="session")
def params():
    return PotentialParams()


@pytest.fixture(scope="session")
def reference_spec():
    return IncidenceSpec(E_REF, THETA, 0.0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    report = getattr(mod, "REPORT", None)
    if not report:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(report):
        terminalreporter.write_line(report[n])
