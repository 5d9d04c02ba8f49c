"""Prints one PASS/FAIL line per release-gate criterion after the run.

The gate tests record their detail string via record_property; emitting
the lines from the terminal-summary hook keeps them visible under
pytest's default output capture.
"""

import re

_CRITERION = re.compile(r"test_criterion_(\d+)")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if getattr(rep, "when", None) != "call":
                continue
            m = _CRITERION.search(rep.nodeid)
            if not m:
                continue
            n = int(m.group(1))
            detail = dict(rep.user_properties or {}).get("detail")
            if rep.passed:
                rows.append((n, f"ACCEPTANCE {n} PASS - {detail or 'ok'}"))
            else:
                rows.append((n, f"ACCEPTANCE {n} FAIL - see {rep.nodeid}"))
    if rows:
        terminalreporter.write_line("")
        for _, line in sorted(rows):
            terminalreporter.write_line(line)
