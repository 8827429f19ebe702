import itertools

import pytest

from swbound.perm import contains_generic

_RESULTS: dict = {}


def brute_avoiders(pat, n):
    return [p for p in itertools.permutations(range(1, n + 1)) if not contains_generic(p, pat)]


@pytest.fixture
def record():
    """Store one summary line per acceptance criterion."""

    def _record(cid: int, ok: bool, detail: str) -> None:
        _RESULTS[cid] = (ok, detail)
        print(f"criterion {cid}: {'PASS' if ok else 'FAIL'} {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_RESULTS):
        ok, detail = _RESULTS[cid]
        terminalreporter.write_line(f"criterion {cid:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
