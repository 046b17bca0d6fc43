import pytest

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture(scope="session")
def acceptance(request):
    """Record one summary line per acceptance criterion.

    ``acceptance(name, status, detail)`` with ``status`` one of ``PASS``,
    ``FAIL`` or ``NOT REPRODUCIBLE``.
    """
    lines = request.config.stash[_LINES]

    def record(name, status, detail=""):
        lines.append(f"{status:<17} {name}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
