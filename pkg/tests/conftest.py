import pytest

from dvbts import generate, replica_spec

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def replica():
    return generate(replica_spec())


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
