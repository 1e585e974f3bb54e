import re

import pytest

_CRITERIA = {}


@pytest.fixture(scope="session")
def landau_sweep():
    """The bundled Landau sweep, computed once and shared by the criteria that read it."""
    from magspec.config import bundled
    from magspec.sweep import run_sweep

    return run_sweep(bundled("landau"))


def pytest_runtest_logreport(report):
    m = re.search(r"test_c(\d\d)_(\w+)", report.nodeid)
    if not m:
        return
    key = (int(m.group(1)), m.group(2))
    failed = report.failed
    if report.when == "call" or failed:
        _CRITERIA[key] = _CRITERIA.get(key, True) and not failed and not report.skipped


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for (num, name), ok in sorted(_CRITERIA.items()):
        terminalreporter.write_line(f"criterion {num:2d} {name.replace('_', ' '):<32} {'PASS' if ok else 'FAIL'}")
