import pytest

# acceptance criteria register "PASS/FAIL n: detail" lines here; they are
# repeated at the end of the run so the verdicts are visible in one block
ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES, key=lambda t: t[0]):
        terminalreporter.write_line(line)
