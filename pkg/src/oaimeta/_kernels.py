"""Bitmask kernels behind the overlap analytics.

Masks are int64 arrays with bit i set when a key is listed by catalog i. Each
kernel has a numba implementation and a pure-numpy one; the numba path is used
when numba imports and ``OAIMETA_DISABLE_NUMBA`` is unset (or "0").
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

DISABLED = os.environ.get("OAIMETA_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")
HAVE_NUMBA = numba is not None


# -- numpy ---------------------------------------------------------------


def region_counts_np(masks: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.unique(masks, return_counts=True)


def pair_counts_np(masks: np.ndarray, k: int) -> np.ndarray:
    """k x k co-membership counts; the diagonal holds per-catalog totals."""
    regions, counts = np.unique(masks, return_counts=True)
    bits = ((regions[:, None] >> np.arange(k, dtype=np.int64)) & 1).astype(np.int64)
    return (bits * counts[:, None]).T @ bits


def popcount_np(masks: np.ndarray) -> np.ndarray:
    return np.bitwise_count(masks.astype(np.uint64)).astype(np.int64)


def drop_bit_np(masks: np.ndarray, bit: int) -> np.ndarray:
    low = masks & ((1 << bit) - 1)
    high = (masks >> (bit + 1)) << bit
    return low | high


# -- numba ---------------------------------------------------------------


HIST_LIMIT = 1 << 16  # masks below this are counted in a dense histogram


def _histogram(masks, size):
    hist = np.zeros(size, np.int64)
    for idx in range(masks.shape[0]):
        hist[masks[idx]] += 1
    return hist


def _region_counts_py(masks):
    n = masks.shape[0]
    if n == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    top = masks.max()
    if top < HIST_LIMIT:
        hist = _histogram(masks, top + 1)
        r = 0
        for m in range(top + 1):
            if hist[m]:
                r += 1
        regions = np.empty(r, np.int64)
        counts = np.empty(r, np.int64)
        r = 0
        for m in range(top + 1):
            if hist[m]:
                regions[r] = m
                counts[r] = hist[m]
                r += 1
        return regions, counts
    s = np.sort(masks)
    regions = np.empty(n, np.int64)
    counts = np.empty(n, np.int64)
    r = 0
    regions[0] = s[0]
    counts[0] = 1
    for i in range(1, n):
        if s[i] == regions[r]:
            counts[r] += 1
        else:
            r += 1
            regions[r] = s[i]
            counts[r] = 1
    return regions[: r + 1].copy(), counts[: r + 1].copy()


def _pair_counts_py(masks, k):
    """Counts per distinct mask first, then one k x k update per region."""
    regions, counts = _region_counts_py(masks)
    out = np.zeros((k, k), np.int64)
    for r in range(regions.shape[0]):
        m = regions[r]
        c = counts[r]
        for i in range(k):
            if (m >> i) & 1:
                for j in range(i, k):
                    if (m >> j) & 1:
                        out[i, j] += c
    for i in range(k):
        for j in range(i + 1, k):
            out[j, i] = out[i, j]
    return out


def _popcount_py(masks):
    out = np.empty(masks.shape[0], np.int64)
    for idx in range(masks.shape[0]):
        m = masks[idx]
        c = 0
        while m:
            m &= m - 1
            c += 1
        out[idx] = c
    return out


def _drop_bit_py(masks, bit):
    out = np.empty_like(masks)
    lowmask = (np.int64(1) << bit) - 1
    for idx in range(masks.shape[0]):
        m = masks[idx]
        out[idx] = (m & lowmask) | ((m >> (bit + 1)) << bit)
    return out


if HAVE_NUMBA:
    _jit = numba.njit(cache=True, nogil=True)
    # loop bodies call each other by global name, so the callees are rebound to
    # their compiled versions before anything that uses them is compiled
    _histogram = _jit(_histogram)
    _region_counts_py = region_counts_nb = _jit(_region_counts_py)
    pair_counts_nb = _jit(_pair_counts_py)
    popcount_nb = _jit(_popcount_py)
    drop_bit_nb = _jit(_drop_bit_py)
else:  # pragma: no cover
    region_counts_nb = _region_counts_py
    pair_counts_nb = _pair_counts_py
    popcount_nb = _popcount_py
    drop_bit_nb = _drop_bit_py


NUMPY = SimpleNamespace(
    name="numpy",
    region_counts=region_counts_np,
    pair_counts=pair_counts_np,
    popcount=popcount_np,
    drop_bit=drop_bit_np,
)

NUMBA = SimpleNamespace(
    name="numba" if HAVE_NUMBA else "python",
    region_counts=region_counts_nb,
    pair_counts=pair_counts_nb,
    popcount=popcount_nb,
    drop_bit=drop_bit_nb,
)

ACTIVE = NUMBA if HAVE_NUMBA and not DISABLED else NUMPY


def as_masks(values) -> np.ndarray:
    return np.asarray(values, dtype=np.int64).reshape(-1)
