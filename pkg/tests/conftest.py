from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from anisoprop.model import OscillatorConfig

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ARTIFACT_DIR = Path(__file__).resolve().parent.parent / "artifacts"

FLAGSHIP = OscillatorConfig(omega1=2.0, omega2=2.0, omega0=3.0)

frequency = st.floats(min_value=0.1, max_value=10.0, allow_nan=False, allow_infinity=False)


@st.composite
def coupled_configs(draw):
    return OscillatorConfig(omega1=draw(frequency), omega2=draw(frequency), omega0=draw(frequency))


@st.composite
def any_configs(draw):
    w0 = draw(st.one_of(st.just(0.0), frequency))
    return OscillatorConfig(omega1=draw(frequency), omega2=draw(frequency), omega0=w0)


coordinate = st.floats(min_value=-3.0, max_value=3.0, allow_nan=False)
fraction = st.floats(min_value=0.05, max_value=0.9)


@pytest.fixture(scope="session")
def artifact_dir():
    ARTIFACT_DIR.mkdir(exist_ok=True)
    return ARTIFACT_DIR


# one summary line per acceptance criterion, collected by test_acceptance.py
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
