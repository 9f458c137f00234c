import sys

sys.path.insert(0, __file__.rsplit("/", 1)[0])

ACCEPTANCE_LINES = []


def record(line):
    """Register a criterion verdict for the end-of-run summary."""
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
