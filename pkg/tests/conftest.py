"""Shared fixtures and the acceptance-result terminal summary."""

from __future__ import annotations

import pytest
from hypothesis import settings

settings.register_profile("suite", deadline=None, max_examples=60)
settings.load_profile("suite")

# (criterion id, description, passed) tuples recorded by test_acceptance.py
ACCEPTANCE_RESULTS: list[tuple[str, str, bool]] = []


@pytest.hookimpl(trylast=True)
def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid, desc, ok in ACCEPTANCE_RESULTS:
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"{status}  {cid}: {desc}")
