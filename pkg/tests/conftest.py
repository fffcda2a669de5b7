from __future__ import annotations

from fractions import Fraction

import pytest

from stochmatch.generators import make_sn_family
from stochmatch.model import StochasticModel, VertexSpec


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    config._criteria = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker and report.when == "call":
        item.config._criteria.append((marker.args[0], marker.args[1], report.passed))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not config._criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed in sorted(config._criteria):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {title}")


def point_model(intervals, edges) -> StochasticModel:
    """Vertices ``0..k-1`` that each die at their deadline with certainty."""
    verts = []
    for i, (a, b) in enumerate(intervals):
        dist = tuple(Fraction(0) for _ in range(b - a)) + (Fraction(1),)
        verts.append(VertexSpec(i, a, b, dist))
    return StochasticModel(tuple(verts), tuple(edges)).check()


@pytest.fixture
def s2():
    return make_sn_family(2, rational=True)


@pytest.fixture
def s4():
    return make_sn_family(4, rational=True)
