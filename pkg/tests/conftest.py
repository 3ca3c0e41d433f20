import json
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def oracles():
    """High-precision reference tables written by ``data/make_oracles.py``."""
    return json.loads((DATA / "oracles.json").read_text())


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion.

    Lines are printed immediately and again, in criterion order, in the
    terminal summary so they survive output capture.
    """
    book = request.config.stash.setdefault(ACCEPTANCE, {})

    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
        book[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    book = config.stash.get(ACCEPTANCE, {})
    if book:
        terminalreporter.section("acceptance criteria")
        for k in sorted(book):
            terminalreporter.write_line(book[k])
