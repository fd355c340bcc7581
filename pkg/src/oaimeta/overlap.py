"""Cross-catalog overlap analytics on membership bitmasks."""

from __future__ import annotations

from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .model import CatalogId, CatalogSnapshot, ConfigError, MembershipMap, OverlapReport, ProbeRecord, check_catalog_order
from .prober import index_records


def build_membership(
    snapshots: Sequence[CatalogSnapshot],
    reachable_only: bool = True,
    probes: Iterable[ProbeRecord] = (),
) -> MembershipMap:
    order = tuple(s.catalog for s in snapshots)
    check_catalog_order(order)
    by_url = index_records(probes) if reachable_only else {}
    entries: dict[str, int] = {}
    for i, snap in enumerate(snapshots):
        bit = 1 << i
        if reachable_only:
            for url in snap.entries_simple:
                rec = by_url.get(url)
                if rec is None:
                    raise ConfigError(f"{snap.catalog.id}: no probe record for {url!r}")
                if rec.reachable:
                    entries[rec.normalized.key] = entries.get(rec.normalized.key, 0) | bit
        else:
            for key in snap.entries_strong:
                entries[key.key] = entries.get(key.key, 0) | bit
    return MembershipMap(order, dict(sorted(entries.items())))


def _masks(mm: MembershipMap) -> np.ndarray:
    return _kernels.as_masks(list(mm.entries.values()))


def venn_regions(mm: MembershipMap, kernels=None) -> dict[int, int]:
    """Count of keys per distinct nonzero membership mask."""
    kernels = kernels or _kernels.ACTIVE
    regions, counts = kernels.region_counts(_masks(mm))
    return {int(r): int(c) for r, c in zip(regions, counts)}


def full_regions(mm: MembershipMap, regions: dict[int, int] | None = None) -> dict[int, int]:
    regions = venn_regions(mm) if regions is None else regions
    return {m: regions.get(m, 0) for m in range(1, mm.full + 1)}


def pairwise_matrix(mm: MembershipMap, kernels=None) -> tuple[list[list[int]], list[int]]:
    """Co-membership counts with a zero diagonal, plus per-catalog totals."""
    kernels = kernels or _kernels.ACTIVE
    k = mm.k
    if not len(mm):
        return [[0] * k for _ in range(k)], [0] * k
    m = np.asarray(kernels.pair_counts(_masks(mm), k))
    totals = [int(x) for x in np.diag(m)]
    matrix = [[0 if i == j else int(m[i, j]) for j in range(k)] for i in range(k)]
    return matrix, totals


def round2(num: int, den: int) -> float:
    """``num/den`` rounded half away from zero to 2 decimals."""
    q = (Decimal(num) / Decimal(den)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
    return float(q)


def ratio_matrix(pairwise: Sequence[Sequence[int]], totals: Sequence[int]) -> list[list[float]]:
    """Row-normalized overlap: share of catalog i's keys also in catalog j."""
    k = len(totals)
    return [
        [0.0 if i == j or totals[i] <= 0 else round2(pairwise[i][j], totals[i]) for j in range(k)]
        for i in range(k)
    ]


def specificity(mm: MembershipMap, kernels=None) -> tuple[float, int]:
    if not len(mm):
        raise ValueError("specificity is undefined for an empty membership map")
    kernels = kernels or _kernels.ACTIVE
    count = int(np.count_nonzero(kernels.popcount(_masks(mm)) == 1))
    return count / len(mm), count


def exclude_catalog(mm: MembershipMap, excluded: CatalogId | str, kernels=None) -> MembershipMap:
    kernels = kernels or _kernels.ACTIVE
    ex = excluded.id if isinstance(excluded, CatalogId) else excluded
    ids = mm.ids()
    if ex not in ids:
        raise ConfigError(f"unknown catalog id {ex!r}")
    bit = ids.index(ex)
    new = kernels.drop_bit(_masks(mm), bit)
    entries = {key: int(m) for key, m in zip(mm.entries, new) if m}
    order = tuple(c for c in mm.catalog_order if c.id != ex)
    return MembershipMap(order, entries)


def all_common(mm: MembershipMap) -> tuple[int, list[str]]:
    if not mm.k:
        return 0, []
    keys = sorted(key for key, m in mm.entries.items() if m == mm.full)
    return len(keys), keys


def analyze(mm: MembershipMap, kernels=None) -> OverlapReport:
    regions = venn_regions(mm, kernels)
    pairwise, totals = pairwise_matrix(mm, kernels)
    if len(mm):
        spec_fraction, spec_count = specificity(mm, kernels)
    else:
        spec_fraction, spec_count = 0.0, 0
    common_count, common = all_common(mm)
    return OverlapReport(
        catalog_order=mm.catalog_order,
        total_distinct=len(mm),
        region_counts=regions,
        pairwise=tuple(tuple(r) for r in pairwise),
        per_catalog_total=tuple(totals),
        ratio=tuple(tuple(r) for r in ratio_matrix(pairwise, totals)),
        specificity_fraction=spec_fraction,
        specificity_count=spec_count,
        all_common_count=common_count,
        all_common=tuple(common),
    )
