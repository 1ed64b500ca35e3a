import numpy as np
import pytest

from gosnrmon.link import compile_link, link_from_config
from gosnrmon.simulation import SignalConfig
from gosnrmon.ssfm import SsfmConfig


def small_link(spans=2, length_km=40.0, launch_dbm=0.0, **extra):
    cfg = {"launch_power_dbm": launch_dbm, "spans": {"count": spans, "length_km": length_km},
           "amps": [{"before_span": k} for k in range(2, spans + 1)]}
    cfg.update(extra)
    return link_from_config(cfg)


@pytest.fixture
def small_plan():
    return compile_link(small_link())


@pytest.fixture
def small_signal():
    return SignalConfig(symbols_per_block=2**12, blocks=2)


@pytest.fixture
def fast_ssfm():
    return SsfmConfig(step_km=2.0, max_phase_rad=5e-3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one pass/fail line for an acceptance criterion."""

    def _report(cid, passed, detail):
        line = f"{cid} {'PASS' if passed else 'FAIL'}: {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
