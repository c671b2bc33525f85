"""Shared fixtures and the per-criterion summary of the acceptance suite."""

import re

import pytest

# criterion number -> list of "name=value" strings recorded by the tests
ACCEPTANCE_DETAIL: dict[int, list[str]] = {}

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")


@pytest.fixture
def record(request):
    """Attach measured values to the summary line of the current criterion."""
    m = _CRITERION.search(request.node.nodeid)
    key = int(m.group(1)) if m else 0

    def _record(name, value):
        text = f"{value:.6g}" if isinstance(value, float) else str(value)
        ACCEPTANCE_DETAIL.setdefault(key, []).append(f"{name}={text}")

    return _record


def pytest_terminal_summary(terminalreporter):
    outcomes = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            m = _CRITERION.search(getattr(rep, "nodeid", ""))
            if not m or getattr(rep, "when", "call") not in ("call", "setup"):
                continue
            n = int(m.group(1))
            if status != "passed" or n not in outcomes:
                outcomes[n] = "PASS" if status == "passed" else "FAIL"
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(outcomes):
        detail = ", ".join(ACCEPTANCE_DETAIL.get(n, []))
        terminalreporter.write_line(f"criterion {n}: {outcomes[n]}" + (f"  ({detail})" if detail else ""))
