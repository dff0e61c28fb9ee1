import contextlib
import time

import pytest

ACCEPTANCE_LINES: list[str] = []


class _Outcome:
    detail = ""


@pytest.fixture
def criterion():
    """Context manager that times one acceptance criterion and records a PASS/FAIL line."""

    @contextlib.contextmanager
    def run(number: int, title: str, limit_s: float):
        outcome = _Outcome()
        start = time.perf_counter()
        try:
            yield outcome
            elapsed = time.perf_counter() - start
            assert elapsed < limit_s, f"took {elapsed:.2f} s, limit {limit_s} s"
        except BaseException as exc:
            elapsed = time.perf_counter() - start
            line = f"FAIL criterion {number}: {title} ({elapsed:.2f} s): {exc}".splitlines()[0]
            ACCEPTANCE_LINES.append(line)
            print(line)
            raise
        line = f"PASS criterion {number}: {title} ({elapsed:.2f} s) {outcome.detail}".rstrip()
        ACCEPTANCE_LINES.append(line)
        print(line)

    return run


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
