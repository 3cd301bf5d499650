import pytest

_ACCEPTANCE: list[str] = []


@pytest.fixture
def record_criterion():
    """Record one ``PASS``/``FAIL`` line for the terminal summary and return the verdict."""

    def record(number: int, title: str, passed: bool, detail: str) -> bool:
        _ACCEPTANCE.append(f"{'PASS' if passed else 'FAIL'}  criterion {number:>2}: {title} ({detail})")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
