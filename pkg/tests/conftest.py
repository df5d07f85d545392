import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE: dict[str, tuple[str, str]] = {}


def record(criterion: str, ok: bool, detail: str) -> None:
    """Store one acceptance outcome; printed in the terminal summary."""
    word = "PASS" if ok else "FAIL"
    ACCEPTANCE[criterion] = (word, detail)
    print(f"{criterion}: {word}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split()[1].rstrip("ab")), k)):
        word, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key:<14} {word:<6} {detail}")
