import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

CRITERIA: dict[int, tuple[bool, str]] = {}


def record(k: int, ok: bool, detail: str) -> None:
    line = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    CRITERIA[k] = (ok, line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[k][1])


@pytest.fixture(scope="session")
def ref05():
    from fraciso.reference import analytic_reference

    return analytic_reference(2, 0.5)
