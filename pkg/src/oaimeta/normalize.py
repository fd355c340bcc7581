"""Two-level URL normalization and order-preserving deduplication.

Simple normalization only drops the query string (and fragment) so the URL can
still be probed. Strong normalization produces the key used to compare entries
across catalogs: scheme, leading ``www.`` and trailing slashes are dropped and
the host is lowercased.
"""

from __future__ import annotations

import logging
import re
from datetime import datetime
from typing import Iterable, Sequence

from .model import CatalogId, CatalogSnapshot, NormalizedUrl

log = logging.getLogger(__name__)

_SCHEME_RE = re.compile(r"^https?://", re.IGNORECASE)
_WWW_RE = re.compile(r"^www\.", re.IGNORECASE)


class RejectedEntry(ValueError):
    """A URL that normalizes to nothing usable."""


def simple_normalize(raw_url: str) -> str:
    url = raw_url.strip()
    cut = len(url)
    for sep in "?#":
        pos = url.find(sep)
        if pos != -1:
            cut = min(cut, pos)
    url = url[:cut].strip()
    if not url:
        raise RejectedEntry(f"empty after simple normalization: {raw_url!r}")
    return url


def _strong_pass(url: str) -> str:
    url = simple_normalize(url)
    url = _SCHEME_RE.sub("", url, count=1)
    url = _WWW_RE.sub("", url, count=1)
    url = url.rstrip("/")
    slash = url.find("/")
    if slash == -1:
        return url.lower()
    return url[:slash].lower() + url[slash:]


def strong_normalize(url: str) -> NormalizedUrl:
    """Comparison key for ``url``.

    A single pass strips one scheme and one ``www.``; inputs such as
    ``http://www.www.x.org`` need another pass, so passes repeat until the
    result stops changing.
    """
    current = url
    while True:
        try:
            nxt = _strong_pass(current)
        except RejectedEntry:
            raise RejectedEntry(f"empty after strong normalization: {url!r}") from None
        if nxt == current:
            break
        current = nxt
    if "://" in current:
        raise RejectedEntry(f"unsupported scheme or embedded '://': {url!r}")
    return NormalizedUrl(current)


def dedupe(urls: Iterable[str]) -> tuple[list[str], int]:
    """Keep first occurrences; return ``(unique, removed)``."""
    seen: set[str] = set()
    unique: list[str] = []
    n = 0
    for u in urls:
        n += 1
        if u not in seen:
            seen.add(u)
            unique.append(u)
    return unique, n - len(unique)


def simple_entries(raw_urls: Sequence[str]) -> tuple[list[str], int]:
    """Simple-normalize and dedupe; returns ``(unique, rejected)``."""
    out: list[str] = []
    rejected = 0
    for raw in raw_urls:
        try:
            out.append(simple_normalize(raw))
        except RejectedEntry as exc:
            rejected += 1
            log.warning("rejected entry: %s", exc)
    unique, _ = dedupe(out)
    return unique, rejected


def strong_entries(simple_urls: Sequence[str]) -> list[NormalizedUrl]:
    keys: list[str] = []
    for u in simple_urls:
        try:
            keys.append(strong_normalize(u).key)
        except RejectedEntry as exc:
            log.warning("rejected entry: %s", exc)
    unique, _ = dedupe(keys)
    return [NormalizedUrl(k) for k in unique]


def build_snapshot(
    catalog: CatalogId, raw_urls: Sequence[str], all_items: int, harvested_at: datetime
) -> CatalogSnapshot:
    """Snapshot with both normalization levels applied.

    Simple entries that cannot be strong-normalized are rejected from both
    lists so every probe URL has a comparison key.
    """
    simple, _ = simple_entries(raw_urls)
    kept = []
    for u in simple:
        try:
            strong_normalize(u)
        except RejectedEntry as exc:
            log.warning("%s: rejected entry: %s", catalog.id, exc)
            continue
        kept.append(u)
    return CatalogSnapshot(
        catalog=catalog,
        harvested_at=harvested_at,
        all_items=all_items,
        only_oai=len(raw_urls),
        entries_simple=tuple(kept),
        entries_strong=tuple(strong_entries(kept)),
    )
