import sys
from pathlib import Path

import pytest

# make tests/oracles.py importable as a top-level module
sys.path.insert(0, str(Path(__file__).parent))

_LINES: list[str] = []


class AcceptanceLog:
    def record(self, number: int, passed: bool, summary: str, seconds: float, limit: float) -> None:
        status = "PASS" if passed else "FAIL"
        line = f"criterion {number:>2} {status}  {summary}  [{seconds:.1f}s of {limit:.0f}s]"
        _LINES.append(line)
        print(line)


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
