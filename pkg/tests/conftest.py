from __future__ import annotations

from datetime import datetime, timezone

import pytest

from oaimeta import _kernels
from oaimeta.model import CatalogId, CatalogSnapshot, NormalizedUrl

T0 = datetime(2017, 1, 15, tzinfo=timezone.utc)


def snapshot(cid: str, keys, all_items=None, only_oai=None) -> CatalogSnapshot:
    """Snapshot whose simple entries are ``http://<key>``."""
    keys = list(dict.fromkeys(keys))
    n = len(keys)
    return CatalogSnapshot(
        catalog=CatalogId(cid),
        harvested_at=T0,
        all_items=n if all_items is None else all_items,
        only_oai=n if only_oai is None else only_oai,
        entries_simple=tuple(f"http://{k}" for k in keys),
        entries_strong=tuple(NormalizedUrl(k) for k in keys),
    )


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the numba kernels once so timed tests measure steady state."""
    import numpy as np

    m = np.array([1, 3], dtype=np.int64)
    for kern in (_kernels.NUMPY, _kernels.NUMBA):
        kern.region_counts(m)
        kern.pair_counts(m, 2)
        kern.popcount(m)
        kern.drop_bit(m, 0)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
