"""Suite-wide pytest hooks.

The acceptance tests double as the release gate, so the terminal summary
always ends with one PASS/FAIL line per acceptance criterion regardless
of output capturing.
"""


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance" not in nodeid or getattr(rep, "when", "call") != "call":
                continue
            rows.append((nodeid.split("::")[-1], outcome == "passed"))
    if not rows:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, ok in sorted(rows):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}")
