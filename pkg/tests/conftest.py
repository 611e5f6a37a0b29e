"""Collects the acceptance lines and repeats them in the terminal summary."""

ACCEPTANCE: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> str:
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'} | {detail}"
    if n not in ACCEPTANCE:
        ACCEPTANCE[n] = line
        print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
