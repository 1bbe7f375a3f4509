from pathlib import Path

import pytest

from fxchain import allocator, dfg

SAMPLES = Path(__file__).resolve().parent.parent / "samples"


@pytest.fixture(scope="session")
def samples():
    return SAMPLES


@pytest.fixture(scope="session")
def fir():
    return dfg.load(SAMPLES / "fir5.dfg")


@pytest.fixture(scope="session")
def fir_report(fir):
    return allocator.assign_formats(fir)


@pytest.fixture(scope="session")
def fir4():
    return dfg.load(SAMPLES / "fir5_4bit.dfg")


# acceptance verdicts, filled by test_acceptance and echoed after the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, title = ACCEPTANCE[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {k}: {title}")
