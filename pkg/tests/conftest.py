"""Shared fixtures.

``table`` is a session-wide gamma table backed by ``tests/.gamma_cache.txt``.
Missing entries are computed once (a few minutes on a cold checkout) and
written back, so later runs only read the file.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cache_indices import required  # noqa: E402
from xijensen.precision import PrecCtx  # noqa: E402
from xijensen.xi_taylor import GammaTable  # noqa: E402

CACHE = Path(__file__).parent / ".gamma_cache.txt"
BITS = 256


@pytest.fixture(scope="session")
def ctx() -> PrecCtx:
    return PrecCtx(BITS)


@pytest.fixture(scope="session")
def table(ctx) -> GammaTable:
    t = GammaTable.load(CACHE) if CACHE.exists() else GammaTable()
    missing = [M for M in required() if not (M in t and t.entries[M].bits >= BITS)]
    if missing:
        workers = max(1, min(8, os.cpu_count() or 1))
        for i in range(0, len(missing), 64):
            t.fill(missing[i : i + 64], ctx, workers)
            t.save(CACHE)
    return t


@pytest.fixture(scope="session")
def cache_path(table) -> Path:
    return CACHE


# -- acceptance summary ---------------------------------------------------------------------

CRITERIA: dict = {}


@pytest.fixture
def criterion():
    """Record a ``criterion N: PASS/FAIL`` line; printed now and in the terminal summary."""

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}"
        CRITERIA.setdefault(number, []).append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        for line in CRITERIA[number]:
            terminalreporter.write_line(line)
