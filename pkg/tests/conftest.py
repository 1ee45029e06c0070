import pytest

from _instances import generic_eq, small_v_eq


@pytest.fixture(scope="session")
def eq():
    return generic_eq()


@pytest.fixture(scope="session")
def eq_small():
    return small_v_eq()


def pytest_terminal_summary(terminalreporter):
    lines = getattr(terminalreporter.config, "_acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for ln in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(ln)
