"""Shared fixtures and the acceptance report.

Tests in ``test_acceptance.py`` carry ``@pytest.mark.criterion("A<n>")``; they
run after everything else, and the terminal summary prints one PASS/FAIL line
per criterion.
"""
from pathlib import Path

import pytest

from deepq.config import load_config
from deepq.harness import train

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"

# nodeid -> outcome for every non-acceptance test in this session
UNIT_OUTCOMES: dict[str, str] = {}
_CRITERIA: dict[str, list[str]] = {}


def pytest_collection_modifyitems(session, config, items):
    items.sort(key=lambda item: item.get_closest_marker("criterion") is not None)


def pytest_runtest_logreport(report):
    if report.when != "call" and report.outcome == "passed":
        return
    if "test_acceptance.py" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        crit = name.split("_")[1].upper()
        _CRITERIA.setdefault(crit, []).append(report.outcome)
    else:
        UNIT_OUTCOMES[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_CRITERIA, key=lambda c: int(c[1:])):
        outcomes = _CRITERIA[crit]
        verdict = "PASS" if all(o == "passed" for o in outcomes) else "FAIL"
        terminalreporter.write_line(f"{crit}: {verdict} ({len(outcomes)} check(s))")


@pytest.fixture(scope="session")
def catch_run(tmp_path_factory):
    """The desk-scale Catch training run, shared by every test that inspects it."""
    out = tmp_path_factory.mktemp("catch_desk")
    return train(load_config(CONFIGS / "catch_desk.cfg"), out)
