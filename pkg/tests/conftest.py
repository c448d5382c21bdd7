import pytest

_CRITERIA: dict[int, str] = {}


class CriterionReporter:
    """Records one pass/fail line per acceptance criterion and asserts it."""

    def __call__(self, number: int, title: str, ok: bool, detail: str) -> None:
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}: {title} | {detail}"
        _CRITERIA[number] = line
        print(line)
        assert ok, line


@pytest.fixture
def criterion():
    return CriterionReporter()


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[number])
