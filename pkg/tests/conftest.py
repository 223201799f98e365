import pytest

ACCEPTANCE = {}
CRITERIA = 11


@pytest.fixture
def verdict(request):
    """Record ``(number, title, passed, detail)`` for the acceptance summary, then assert."""

    def record(number, title, passed, detail=""):
        ACCEPTANCE[number] = (title, bool(passed), detail)
        print(_line(number, title, passed, detail))
        assert passed, f"criterion {number} ({title}): {detail}"

    return record


def _line(number, title, passed, detail):
    return f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d} {title}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, CRITERIA + 1):
        if n in ACCEPTANCE:
            terminalreporter.write_line(_line(n, *ACCEPTANCE[n]))
        else:
            terminalreporter.write_line(f"[FAIL] criterion {n:2d}: not evaluated (test errored or deselected)")
