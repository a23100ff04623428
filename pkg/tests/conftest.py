import pytest

from cchkd.harness import SweepConfig, run_sweep
from cchkd.gaussian_model import CorrelationSpec

SIGMA12_GRID = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)
NOISE_GRID = (0.0, 0.2, 0.4, 0.6, 0.8)

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def sigma12_config():
    return SweepConfig(sweep_variable="sigma12", grid=SIGMA12_GRID)


@pytest.fixture(scope="session")
def sigma12_records(sigma12_config):
    return run_sweep(sigma12_config)


@pytest.fixture(scope="session")
def noise_config():
    return SweepConfig(sweep_variable="noise_level", grid=NOISE_GRID,
                       spec_base=CorrelationSpec(0.5, 0.9, 0.4, 100))


@pytest.fixture(scope="session")
def noise_records(noise_config):
    return run_sweep(noise_config)


@pytest.fixture
def acceptance_report():
    """Record one PASS/FAIL line per acceptance criterion."""

    def report(number, title, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title} ({detail})"
        _ACCEPTANCE_LINES.append((number, line))
        print(line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
