import os
import sys
from dataclasses import replace

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from wigest.synth import ScriptEntry, SimConfig, synth_trace  # noqa: E402

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def push_entry():
    return ScriptEntry(3.0, "push", 1.6, 0.2, 0.6)


@pytest.fixture(scope="session")
def clean_push(push_entry):
    trace, labels = synth_trace(replace(SimConfig(), seed=5), [push_entry], duration_s=push_entry.end_s + 3.0)
    return trace, labels


@pytest.fixture(scope="session")
def clean_idle():
    trace, _ = synth_trace(replace(SimConfig(), seed=6), [], duration_s=5.0)
    return trace
