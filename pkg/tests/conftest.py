import contextlib

import pytest

_LINES: dict[int, str] = {}


class CriterionRecorder:
    """Collects one PASS/FAIL line per acceptance criterion; an exception counts as FAIL."""

    def __init__(self):
        self.detail = ""

    @contextlib.contextmanager
    def criterion(self, number: int, title: str):
        self.detail = ""
        try:
            yield self
        except BaseException as exc:
            self._emit(number, title, False, self.detail or f"{type(exc).__name__}: {exc}")
            raise
        self._emit(number, title, True, self.detail)

    @staticmethod
    def _emit(number, title, passed, detail):
        line = f"criterion {number:2d} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
        _LINES[number] = line
        print(line)


@pytest.fixture
def recorder():
    return CriterionRecorder()


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_LINES):
            terminalreporter.write_line(_LINES[number])
