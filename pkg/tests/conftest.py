import os

import hypothesis
import pytest

from setpart8d.formats import FormatKind, build_format

hypothesis.settings.register_profile("default", max_examples=50, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def fmt():
    """All four built formats keyed by kind."""
    return {k: build_format(k) for k in (FormatKind.PDM_BPSK, FormatKind.PDM_QPSK, FormatKind.PB_5B8D, FormatKind.PA_7B8D)}


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
