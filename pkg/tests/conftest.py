import time
from contextlib import contextmanager

import pytest

_CRITERIA: dict[int, tuple[str, bool, str]] = {}


class Criterion:
    """Times an acceptance criterion and records one PASS/FAIL line for the summary."""

    def __init__(self):
        self.notes: list[str] = []

    def note(self, text: str):
        self.notes.append(text)

    @contextmanager
    def __call__(self, number: int, title: str, limit: float):
        self.notes = []
        start = time.perf_counter()
        try:
            yield self
        except BaseException as exc:
            elapsed = time.perf_counter() - start
            msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
            _CRITERIA[number] = (title, False, f"{elapsed:.2f}s; {msg}")
            raise
        elapsed = time.perf_counter() - start
        ok = elapsed < limit
        detail = "; ".join([f"{elapsed:.2f}s (limit {limit:g}s)"] + self.notes)
        _CRITERIA[number] = (title, ok, detail)
        assert ok, f"runtime {elapsed:.2f}s exceeds {limit:g}s"


@pytest.fixture
def criterion():
    return Criterion()


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} [{detail}]")
