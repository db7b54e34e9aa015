import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

# acceptance verdict lines, filled by test_acceptance.py
VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
