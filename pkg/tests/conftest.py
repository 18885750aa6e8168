"""Shared pytest plumbing: the end-to-end suite's one-line verdicts.

test_acceptance.py records a PASS/FAIL line per pipeline property; printing
them from inside tests would be swallowed by capture, so they are replayed
in the terminal summary where they survive any -q/-v combination.
"""

_verdicts = []


def record_verdict(line: str) -> None:
    _verdicts.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _verdicts:
        terminalreporter.section("pipeline checks")
        for line in _verdicts:
            terminalreporter.line(line)
