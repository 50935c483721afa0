import re

import numpy as np
import pytest

from yawcorr.scada import Telemetry

_ACCEPTANCE = {}
_OUTCOMES = {}


def make_tel(n=None, **channels):
    """Telemetry with benign defaults for every channel not given."""
    if n is None:
        n = len(next(iter(channels.values()))) if channels else 1
    base = dict(
        timestamp=1_600_000_000 + 60 * np.arange(n),
        wind_speed=np.full(n, 8.0),
        wind_direction=np.full(n, 180.0),
        nacelle_direction=np.full(n, 180.0),
        power=np.full(n, 1000.0),
        power_limit=np.full(n, 2500.0),
        pitch_angle=np.full(n, 0.5),
        air_density=np.full(n, 1.225),
        fault_code=np.zeros(n, dtype=np.int64),
    )
    base.update(channels)
    return Telemetry(**base)


@pytest.fixture
def record_acceptance():
    def record(number, detail):
        _ACCEPTANCE[number] = detail
    return record


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)", report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _OUTCOMES[n] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_OUTCOMES):
        status = "PASS" if _OUTCOMES[n] == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {status}  {_ACCEPTANCE.get(n, '')}")
