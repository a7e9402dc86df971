import pytest

from erlangcev import Exponential, PhaseIntensities, Uniform, reference_params

ACCEPTANCE_LINES = []


@pytest.fixture
def params():
    return reference_params(0.18)


@pytest.fixture
def params0():
    return reference_params(0.0)


@pytest.fixture
def phases():
    return PhaseIntensities((0.5, 2.0))


@pytest.fixture(params=["uniform", "exponential"])
def claim(request):
    return Uniform(0.0, 1.0) if request.param == "uniform" else Exponential(2.0)


@pytest.fixture
def record():
    """Collect one summary line per acceptance criterion."""

    def _record(tag, passed, detail):
        ACCEPTANCE_LINES.append(f"{tag}: {'PASS' if passed else 'FAIL'}  {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
