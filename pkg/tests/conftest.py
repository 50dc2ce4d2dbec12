import pytest

_REPORT_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_REPORT_KEY] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance verdict line; returns the verdict for asserting."""
    lines = request.config.stash[_REPORT_KEY]

    def record(number, title, ok, detail, status=None):
        status = status or ("PASS" if ok else "FAIL")
        line = f"[{status}] criterion {number}: {title} | {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_REPORT_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
