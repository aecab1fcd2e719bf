import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Render one line per acceptance criterion after the run."""
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None) if mod else None
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num, name, status, seconds in sorted(results):
        terminalreporter.write_line(f"criterion {num:2d} ({name}): {status} [{seconds:.1f}s]")
