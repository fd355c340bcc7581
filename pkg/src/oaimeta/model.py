"""Domain vocabulary shared across the pipeline."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Mapping, Sequence

MAX_CATALOGS = 30

_ID_RE = re.compile(r"^[a-z0-9_-]+$")


class ConfigError(ValueError):
    """Invalid catalog configuration (unknown or duplicate ids, bad manifests)."""


@dataclass(frozen=True, order=True)
class CatalogId:
    id: str
    display_name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if not self.id or not _ID_RE.match(self.id):
            raise ConfigError(f"invalid catalog id {self.id!r}: expected [a-z0-9_-]+")
        if not self.display_name:
            object.__setattr__(self, "display_name", self.id)

    def __str__(self) -> str:
        return self.id


def check_catalog_order(order: Sequence[CatalogId]) -> None:
    seen: set[str] = set()
    for cat in order:
        if cat.id in seen:
            raise ConfigError(f"duplicate catalog id {cat.id!r}")
        seen.add(cat.id)
    if len(order) > MAX_CATALOGS:
        raise ConfigError(f"{len(order)} catalogs exceeds the limit of {MAX_CATALOGS}")


def _cid(c: CatalogId | str) -> str:
    return c.id if isinstance(c, CatalogId) else c


def mask_of(catalogs: Iterable[CatalogId | str], order: Sequence[CatalogId | str]) -> int:
    """Bitmask with bit i set iff ``order[i]`` is in ``catalogs``."""
    positions = {_cid(c): i for i, c in enumerate(order)}
    mask = 0
    for c in catalogs:
        try:
            mask |= 1 << positions[_cid(c)]
        except KeyError:
            raise ConfigError(f"unknown catalog id {_cid(c)!r}") from None
    return mask


def full_mask(k: int) -> int:
    return (1 << k) - 1


@dataclass(frozen=True)
class RawRepositoryEntry:
    source: CatalogId
    raw_url: str
    name: str | None = None

    def __post_init__(self) -> None:
        if not self.raw_url.strip():
            raise ValueError("raw_url is empty")


@dataclass(frozen=True, order=True)
class NormalizedUrl:
    key: str

    def __post_init__(self) -> None:
        k = self.key
        if not k:
            raise ValueError("normalized url is empty")
        if "://" in k or "?" in k or k.endswith("/") or k[:4].lower() == "www.":
            raise ValueError(f"not a strong-normalized url: {k!r}")

    def __str__(self) -> str:
        return self.key


@dataclass(frozen=True)
class CatalogSnapshot:
    catalog: CatalogId
    harvested_at: datetime
    all_items: int
    only_oai: int
    entries_simple: tuple[str, ...]
    entries_strong: tuple[NormalizedUrl, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries_simple", tuple(self.entries_simple))
        object.__setattr__(self, "entries_strong", tuple(self.entries_strong))
        if not (self.all_items >= self.only_oai >= len(self.entries_simple) >= len(self.entries_strong)):
            raise ValueError(
                f"{self.catalog.id}: count chain violated "
                f"({self.all_items}, {self.only_oai}, {len(self.entries_simple)}, {len(self.entries_strong)})"
            )
        if len(set(self.entries_simple)) != len(self.entries_simple):
            raise ValueError(f"{self.catalog.id}: duplicate simple entries")
        if len(set(self.entries_strong)) != len(self.entries_strong):
            raise ValueError(f"{self.catalog.id}: duplicate strong entries")

    @property
    def unique(self) -> int:
        return len(self.entries_simple)


class Outcome(str, enum.Enum):
    REACHABLE = "Reachable"
    WRONG_SUCCESS = "WrongSuccess"
    HTTP_ERROR = "HttpError"
    TRANSPORT_ERROR = "TransportError"


@dataclass(frozen=True)
class ProbeRecord:
    probe_url: str
    normalized: NormalizedUrl
    outcome: Outcome
    http_status: int | None
    repository_name: str | None = None
    protocol_version: str | None = None
    earliest_datestamp: str | None = None
    attempts: int = 1
    completed_at: datetime | None = None

    def __post_init__(self) -> None:
        o, s = self.outcome, self.http_status
        if o is Outcome.TRANSPORT_ERROR:
            if s is not None:
                raise ValueError("TransportError carries no http status")
        elif s is None:
            raise ValueError(f"{o.value} requires an http status")
        elif o in (Outcome.REACHABLE, Outcome.WRONG_SUCCESS) and s != 200:
            raise ValueError(f"{o.value} requires status 200, got {s}")
        elif o is Outcome.HTTP_ERROR and s == 200:
            raise ValueError("HttpError cannot have status 200")
        has_identity = any((self.repository_name, self.protocol_version, self.earliest_datestamp))
        if has_identity and o is not Outcome.REACHABLE:
            raise ValueError("identity fields are only set on Reachable records")
        if self.attempts < 1:
            raise ValueError("attempts must be positive")

    @property
    def reachable(self) -> bool:
        return self.outcome is Outcome.REACHABLE


@dataclass(frozen=True)
class MembershipMap:
    """Normalized URL key -> bitmask of the catalogs listing it."""

    catalog_order: tuple[CatalogId, ...]
    entries: Mapping[str, int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "catalog_order", tuple(self.catalog_order))
        check_catalog_order(self.catalog_order)
        limit = full_mask(len(self.catalog_order))
        for key, m in self.entries.items():
            if m == 0:
                raise ValueError(f"zero mask for {key!r}")
            if m & ~limit:
                raise ValueError(f"mask {m:#b} for {key!r} sets bits beyond {len(self.catalog_order)} catalogs")

    @property
    def k(self) -> int:
        return len(self.catalog_order)

    @property
    def full(self) -> int:
        return full_mask(self.k)

    def __len__(self) -> int:
        return len(self.entries)

    def ids(self) -> list[str]:
        return [c.id for c in self.catalog_order]


@dataclass(frozen=True)
class OverlapReport:
    catalog_order: tuple[CatalogId, ...]
    total_distinct: int
    region_counts: Mapping[int, int]
    pairwise: tuple[tuple[int, ...], ...]
    per_catalog_total: tuple[int, ...]
    ratio: tuple[tuple[float, ...], ...]
    specificity_fraction: float
    specificity_count: int
    all_common_count: int
    all_common: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if sum(self.region_counts.values()) != self.total_distinct:
            raise ValueError("region counts do not sum to total_distinct")
        k = len(self.catalog_order)
        for i in range(k):
            if self.pairwise[i][i] != 0:
                raise ValueError("pairwise diagonal must be zero")
            for j in range(k):
                if self.pairwise[i][j] != self.pairwise[j][i]:
                    raise ValueError("pairwise matrix is not symmetric")
        if self.all_common_count != self.region_counts.get(full_mask(k), 0):
            raise ValueError("all_common_count disagrees with the full-mask region")
