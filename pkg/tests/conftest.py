import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from postmech.dist import Generator, OrderStatistic, TabulatedJoint, uniform_triangle

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

K_STAR = (5 - np.sqrt(7)) / 6


@pytest.fixture(scope="session")
def uniform():
    return uniform_triangle()


@pytest.fixture(scope="session")
def power2():
    return OrderStatistic(Generator("power", 2.0))


def perturbed_tabulated(n=201, amp=0.3):
    """Uniform triangle density times a smooth positive bump."""
    x = np.linspace(0, 1, n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    return TabulatedJoint(2.0 * (1 + amp * np.sin(np.pi * X) * np.cos(np.pi * Y / 2)))


@pytest.fixture(scope="session")
def tabulated():
    return perturbed_tabulated()


# acceptance criteria: collect one PASS/FAIL line per criterion
_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    name = report.nodeid.rsplit("::", 1)[-1]
    if "test_acceptance.py" in report.nodeid and name.startswith("test_ac"):
        key = name.split("_")[1].upper()
        prev = _ACCEPTANCE.get(key, True)
        _ACCEPTANCE[key] = prev and report.passed


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: int(k[2:])):
        terminalreporter.write_line(f"{key}: {'PASS' if _ACCEPTANCE[key] else 'FAIL'}")
