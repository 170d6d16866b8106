"""Shared pytest configuration.

The acceptance tests register one verdict line each; the hook below
re-emits them as a summary section so the verdicts are visible in the
terminal report even for passing tests.
"""

acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_lines:
        terminalreporter.section("acceptance summary")
        for line in acceptance_lines:
            terminalreporter.write_line(line)
