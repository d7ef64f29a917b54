import pytest

_VERDICTS: list[str] = []


class Verdict:
    """Record and print one PASS/FAIL line per acceptance criterion."""

    def __call__(self, label: str, ok: bool, detail: str) -> bool:
        line = f"{label} {'PASS' if ok else 'FAIL'}: {detail}"
        print(line)
        _VERDICTS.append(line)
        return ok


@pytest.fixture
def verdict():
    return Verdict()


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
