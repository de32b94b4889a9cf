import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def benchmark_suite():
    """Full-size four-sample benchmark (about a minute to build)."""
    from lobspoof.synthgen import make_benchmark_suite

    return make_benchmark_suite(0)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, with the measured values."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" not in nodeid or rep.when not in ("call", "setup"):
                continue
            if rep.when == "setup" and outcome == "passed":
                continue
            name = nodeid.split("::")[-1]
            num = int(name.split("_")[2])
            detail = "; ".join(f"{k}={v}" for k, v in rep.user_properties)
            lines.append((num, f"criterion {num}: {'PASS' if outcome == 'passed' else 'FAIL'}  {name}  {detail}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
