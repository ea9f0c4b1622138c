import pytest

# (criterion number, verdict, detail) rows filled in by test_acceptance.py
ACCEPTANCE: list[tuple[int, str, str]] = []


def record(num: int, ok: bool, detail: str) -> None:
    verdict = "PASS" if ok else "FAIL"
    ACCEPTANCE.append((num, verdict, detail))
    print(f"criterion {num:>2}: {verdict}  {detail}")


@pytest.fixture
def acceptance_record():
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, verdict, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {num:>2}: {verdict}  {detail}")
