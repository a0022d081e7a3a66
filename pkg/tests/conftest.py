"""Shared pytest hooks.

The acceptance tests append one formatted line per criterion to
``ACCEPTANCE_LINES``; the terminal-summary hook re-emits them in a
dedicated section so the verdicts survive output capture and land at
the bottom of every run.
"""

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
