"""Machine-readable tables and documents for counts, probes and overlaps.

All output is deterministic: catalog order comes from the manifest, numbers are
formatted at fixed precision and nothing time-dependent enters a table body.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from http import HTTPStatus
from typing import Any, Mapping, Sequence

from .model import CatalogId, CatalogSnapshot, OverlapReport, full_mask
from .prober import TRANSPORT, WRONG_SUCCESS, CatalogProbeStats, OutcomeSummary

SEPARATOR = "&"
NO_ERRORS = "no errors"

COUNTS_CSV = "counts.csv"
PROBES_CSV = "probes.csv"
ERRORS_CSV = "errors.csv"
OVERLAP_JSON = "overlap.json"
REGIONS_CSV = "regions.csv"
DIFF_CSV = "diff.csv"


class DiffError(ValueError):
    pass


def fmt_ratio(num: int, den: int, places: int, scale: int = 1) -> str:
    """Fixed-precision ``scale * num / den``, rounded half away from zero."""
    if den == 0:
        value = Decimal(0)
    else:
        value = Decimal(num * scale) / Decimal(den)
    return str(value.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class Table:
    header: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        w.writerows(self.rows)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Table":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty table")
        return cls(tuple(rows[0]), tuple(tuple(r) for r in rows[1:]))

    def to_dict(self) -> dict[str, Any]:
        return {"header": list(self.header), "rows": [list(r) for r in self.rows]}

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "Table":
        return cls(tuple(doc["header"]), tuple(tuple(r) for r in doc["rows"]))


def emit_count_table(snapshots: Sequence[CatalogSnapshot]) -> Table:
    if not snapshots:
        raise ValueError("no snapshots")
    header = ("",) + tuple(s.catalog.id for s in snapshots)
    rows = (
        ("all_items",) + tuple(str(s.all_items) for s in snapshots),
        ("only_oai",) + tuple(str(s.only_oai) for s in snapshots),
        ("unique",) + tuple(str(s.unique) for s in snapshots),
    )
    return Table(header, rows)


@dataclass(frozen=True)
class ProbeTables:
    probes: Table
    errors: Table


def bucket_label(bucket: str) -> str:
    if bucket == WRONG_SUCCESS:
        return "Wrong success 200"
    if bucket == TRANSPORT:
        return "Transport error"
    try:
        return f"{HTTPStatus(int(bucket)).phrase} {bucket}"
    except ValueError:
        return f"HTTP {bucket}"


def emit_probe_table(stats: Sequence[CatalogProbeStats], summary: OutcomeSummary) -> ProbeTables:
    """Per-catalog availability (percent, 1 decimal) and error mix (fractions, 2 decimals)."""
    if not stats:
        raise ValueError("no catalog stats")
    header = ("",) + tuple(s.catalog for s in stats)
    probes = Table(header, (
        ("nb_total",) + tuple(str(s.total) for s in stats),
        ("nb_success",) + tuple(str(s.success) for s in stats),
        ("nb_unique",) + tuple(str(s.unique) for s in stats),
        ("pct_success",) + tuple(fmt_ratio(s.success, s.total, 1, 100) for s in stats),
        ("pct_error",) + tuple(fmt_ratio(s.total - s.success, s.total, 1, 100) for s in stats),
    ))
    n = summary.error_count
    if n == 0:
        rows: tuple[tuple[str, ...], ...] = (("none", NO_ERRORS, "0", "0.00"),)
    else:
        rows = tuple(
            (b, bucket_label(b), str(c), fmt_ratio(c, n, 2)) for b, c in summary.error_counts.items()
        )
    errors = Table(("code", "label", "count", "fraction"), rows)
    return ProbeTables(probes, errors)


def region_name(mask: int, ids: Sequence[str], sep: str = SEPARATOR) -> str:
    return sep.join(c for i, c in enumerate(ids) if mask >> i & 1)


def emit_overlap_report(report: OverlapReport, sep: str = SEPARATOR) -> dict[str, Any]:
    ids = [c.id for c in report.catalog_order]
    k = len(ids)
    regions = [
        {
            "mask": m,
            "bits": format(m, f"0{k}b"),
            "name": region_name(m, ids, sep),
            "count": report.region_counts.get(m, 0),
        }
        for m in range(1, full_mask(k) + 1)
    ]
    return {
        "catalog_order": ids,
        "display_names": [c.display_name for c in report.catalog_order],
        "separator": sep,
        "total_distinct": report.total_distinct,
        "per_catalog_total": list(report.per_catalog_total),
        "pairwise": [list(r) for r in report.pairwise],
        "ratio": [list(r) for r in report.ratio],
        "specificity": {"count": report.specificity_count, "fraction": report.specificity_fraction},
        "all_common": {"count": report.all_common_count, "keys": list(report.all_common)},
        "regions": regions,
    }


def overlap_json(report: OverlapReport) -> str:
    return json.dumps(emit_overlap_report(report), indent=2, ensure_ascii=False) + "\n"


def overlap_from_document(doc: Mapping[str, Any]) -> OverlapReport:
    order = tuple(CatalogId(i, n) for i, n in zip(doc["catalog_order"], doc["display_names"]))
    return OverlapReport(
        catalog_order=order,
        total_distinct=doc["total_distinct"],
        region_counts={r["mask"]: r["count"] for r in doc["regions"] if r["count"]},
        pairwise=tuple(tuple(r) for r in doc["pairwise"]),
        per_catalog_total=tuple(doc["per_catalog_total"]),
        ratio=tuple(tuple(float(x) for x in r) for r in doc["ratio"]),
        specificity_fraction=doc["specificity"]["fraction"],
        specificity_count=doc["specificity"]["count"],
        all_common_count=doc["all_common"]["count"],
        all_common=tuple(doc["all_common"]["keys"]),
    )


def regions_table(report: OverlapReport, sep: str = SEPARATOR) -> Table:
    doc = emit_overlap_report(report, sep)
    return Table(
        ("mask", "bits", "name", "count"),
        tuple((str(r["mask"]), r["bits"], r["name"], str(r["count"])) for r in doc["regions"]),
    )


def diff_runs(earlier: Sequence[CatalogSnapshot], later: Sequence[CatalogSnapshot]) -> Table:
    """Growth per shared catalog, measured on strong-normalized keys."""
    before = {s.catalog.id: s for s in earlier}
    shared = [s for s in later if s.catalog.id in before]
    if not shared:
        raise DiffError("runs share no catalog")
    rows = []
    for s in shared:
        old = {k.key for k in before[s.catalog.id].entries_strong}
        new = {k.key for k in s.entries_strong}
        rows.append((
            s.catalog.id,
            str(len(old)),
            str(len(new)),
            f"{len(new) - len(old):+d}",
            str(len(new - old)),
            str(len(old - new)),
        ))
    return Table(("catalog", "earlier_unique", "later_unique", "delta", "appeared", "disappeared"), tuple(rows))
