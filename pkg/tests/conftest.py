import time

import pytest

from camnet import runner
from camnet.scenario import bundled, load_scenario

# "criterion N: PASS|FAIL ..." lines collected by the acceptance module
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def golden():
    return load_scenario(bundled("five_camera.scn"))


@pytest.fixture(scope="session")
def golden_runs(golden):
    """Five-camera runs keyed by k_s (k_e = 1), with wall-clock seconds per run."""
    out = {}
    for ks in (1.0, 10.0, 50.0):
        t0 = time.perf_counter()
        res = runner.execute(golden.with_overrides(k_s=ks))
        out[ks] = (res, time.perf_counter() - t0)
    return out


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
