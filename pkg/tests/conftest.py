import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("ci", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


@pytest.fixture(scope="session")
def flat_world():
    """5x5 all-flat map and its offline library (fast: only flat moves to certify)."""
    from terrain_synth.manager import run_offline
    from terrain_synth.micp import GO2, MicpConfig, default_catalog
    from terrain_synth.runtime import from_layout
    sc = from_layout(["flat"] * 25, 5, 5, start=(2, 0), goal_cell=(2, 4))
    lib, report, checks = run_offline(sc.polygons, sc.grid, sc.catalog, default_catalog(), GO2, MicpConfig())
    return sc, lib, report, checks


_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance check; the lines are repeated in the run summary."""
    def report(n, ok, detail):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        _CRITERIA.append(line)
        assert ok, line
    return report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA):
            terminalreporter.write_line(line)
