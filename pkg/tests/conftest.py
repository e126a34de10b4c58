import numpy as np
import pytest

from conevortex.torus import TorusGrid

_CRITERIA: list[tuple[str, str, bool, str]] = []


@pytest.fixture
def grid64():
    return TorusGrid.square(64)


@pytest.fixture
def grid128():
    return TorusGrid.square(128)


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


@pytest.fixture
def criterion():
    """Record one acceptance line; the summary is printed at session end."""

    def record(cid: str, desc: str, ok: bool, detail: str = "") -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {cid}: {desc}" + (f" ({detail})" if detail else "")
        print(line)
        _CRITERIA.append((cid, desc, ok, detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid, desc, ok, detail in _CRITERIA:
        extra = f" ({detail})" if detail else ""
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {cid}: {desc}{extra}")
