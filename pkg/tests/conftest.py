import pytest

_CRITERIA: dict[int, str] = {}


class CriterionRecorder:
    """Records one PASS/FAIL line per acceptance criterion, then asserts."""

    def __call__(self, number: int, title: str, ok: bool, detail: str = "") -> None:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {title}"
        if detail:
            line += f" ({detail})"
        _CRITERIA[number] = line
        print(line)
        assert ok, line


@pytest.fixture
def criterion():
    return CriterionRecorder()


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
