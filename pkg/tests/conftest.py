import warnings

import numpy as np
import pytest

from delaylab.appdelay import SUB_MTU, SUPER_MTU, Scenario
from delaylab.distributions import Exponential, Uniform
from delaylab.sim import available_backends

MTU = 1500.0


def table_scenario(lams, dist, cap, regime=SUB_MTU, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return Scenario.homogeneous(lams, dist, mtu_bytes=MTU, capacity_pkts_per_s=cap,
                                    regime=regime, **kw)


@pytest.fixture
def table1():
    return table_scenario([10, 10, 10, 10], Uniform(750, 1500), 70.0)


@pytest.fixture
def table5():
    return table_scenario([1.7] * 4, Uniform(1500, 4500), 68.9, SUPER_MTU)


@pytest.fixture
def table7():
    return table_scenario([1.7] * 4, Exponential(3000), 62.5, SUPER_MTU)


@pytest.fixture(params=available_backends())
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> str:
    line = f"criterion {number:>2}  {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
