"""Declarative meta-catalog source adapters.

Every catalog is described by a manifest entry holding one or two regex
extraction steps. Documents come from an injected fetcher so the same manifest
runs against the live web or a directory of recorded fixtures.
"""

from __future__ import annotations

import enum
import logging
import re
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import yaml

from .model import CatalogId, ConfigError, RawRepositoryEntry, check_catalog_order

log = logging.getLogger(__name__)

Fetcher = Callable[[str], str]

FILE_PREFIX = "file:"


class ManifestError(ConfigError):
    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class FetchError(Exception):
    pass


class HarvestError(Exception):
    def __init__(self, catalog: str, reason: str):
        self.catalog = catalog
        super().__init__(f"{catalog}: {reason}")


class StepKind(str, enum.Enum):
    PATTERN_EXTRACT = "PatternExtract"
    LINK_FOLLOW = "LinkFollow"


@dataclass(frozen=True)
class ExtractionStep:
    kind: StepKind
    fetch_url: str
    pattern: str
    capture_group: int = 1
    regex: re.Pattern = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", StepKind(self.kind))
        try:
            rx = re.compile(self.pattern)
        except re.error as exc:
            raise ManifestError(f"pattern does not compile: {exc}") from None
        if not 1 <= self.capture_group <= rx.groups:
            raise ManifestError(
                f"capture_group {self.capture_group} not in pattern with {rx.groups} group(s)"
            )
        object.__setattr__(self, "regex", rx)


@dataclass(frozen=True)
class SourceManifest:
    catalog: CatalogId
    steps: tuple[ExtractionStep, ...]
    notes: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))
        kinds = [s.kind for s in self.steps]
        if kinds == [StepKind.PATTERN_EXTRACT]:
            return
        if kinds != [StepKind.LINK_FOLLOW, StepKind.PATTERN_EXTRACT]:
            raise ManifestError(
                "steps must be [PatternExtract] or [LinkFollow, PatternExtract], "
                f"got {[k.value for k in kinds]}"
            )


def parse_manifest(text: str, source: str = "<manifest>") -> list[SourceManifest]:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f"{source}:{mark.line + 1}:{mark.column + 1}" if mark else source
        raise ManifestError(f"unparseable manifest ({getattr(exc, 'problem', exc)})", loc) from None
    if isinstance(doc, dict) and "sources" in doc:
        doc = doc["sources"]
    if doc is None:
        doc = []
    if not isinstance(doc, list):
        raise ManifestError("top level must be a list of sources", source)

    manifests = []
    for i, item in enumerate(doc):
        loc = f"{source}: sources[{i}]"
        if not isinstance(item, dict):
            raise ManifestError("source must be a mapping", loc)
        unknown = set(item) - {"id", "display_name", "steps", "notes"}
        if unknown:
            raise ManifestError(f"unknown field(s) {sorted(unknown)}", loc)
        try:
            cat = CatalogId(str(item.get("id", "")), str(item.get("display_name") or ""))
            raw_steps = item.get("steps")
            if not isinstance(raw_steps, list) or not raw_steps:
                raise ManifestError("steps must be a non-empty list")
            steps = []
            for j, st in enumerate(raw_steps):
                if not isinstance(st, dict):
                    raise ManifestError(f"steps[{j}] must be a mapping")
                extra = set(st) - {"kind", "fetch_url", "pattern", "capture_group"}
                if extra:
                    raise ManifestError(f"steps[{j}]: unknown field(s) {sorted(extra)}")
                try:
                    steps.append(ExtractionStep(
                        kind=StepKind(st.get("kind")),
                        fetch_url=str(st.get("fetch_url") or ""),
                        pattern=str(st.get("pattern") or ""),
                        capture_group=int(st.get("capture_group", 1)),
                    ))
                except ValueError as exc:
                    raise ManifestError(f"steps[{j}]: {exc}") from None
            manifests.append(SourceManifest(cat, tuple(steps), item.get("notes")))
        except ConfigError as exc:
            if isinstance(exc, ManifestError) and exc.location:
                raise
            raise ManifestError(str(exc), loc) from None
    try:
        check_catalog_order([m.catalog for m in manifests])
    except ConfigError as exc:
        raise ManifestError(str(exc), source) from None
    return manifests


def load_manifest(path: str | Path) -> list[SourceManifest]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest: {exc.strerror}", str(path)) from None
    return parse_manifest(text, str(path))


def _captures(document: str, step: ExtractionStep) -> list[str]:
    g = step.capture_group
    return [(m.group(g) or "").strip() for m in step.regex.finditer(document)]


def extract_entries(document: str, step: ExtractionStep) -> list[str]:
    """Non-empty captures of ``step.pattern`` in document order."""
    if step.kind is not StepKind.PATTERN_EXTRACT:
        raise ValueError("extract_entries needs a PatternExtract step")
    return [c for c in _captures(document, step) if c]


def resolve_link(base: str, link: str) -> str:
    if link.startswith(FILE_PREFIX) or "://" in link:
        return link
    if base.startswith(FILE_PREFIX):
        parent = base[len(FILE_PREFIX):].rsplit("/", 1)
        prefix = parent[0] + "/" if len(parent) == 2 else ""
        return FILE_PREFIX + prefix + link
    return urllib.parse.urljoin(base, link)


def follow_links(document: str, step: ExtractionStep, fetcher: Fetcher) -> tuple[list[str], int]:
    """Fetch every page linked from ``document``.

    Returns the bodies in link order and the number of failed fetches; a
    failed page contributes an empty body.
    """
    if step.kind is not StepKind.LINK_FOLLOW:
        raise ValueError("follow_links needs a LinkFollow step")
    bodies: list[str] = []
    failures = 0
    for link in (c for c in _captures(document, step) if c):
        url = resolve_link(step.fetch_url, link)
        try:
            bodies.append(fetcher(url))
        except FetchError as exc:
            log.warning("link fetch failed: %s: %s", url, exc)
            bodies.append("")
            failures += 1
    return bodies, failures


@dataclass(frozen=True)
class HarvestResult:
    entries: tuple[RawRepositoryEntry, ...]
    all_items: int
    link_failures: int = 0

    @property
    def only_oai(self) -> int:
        return len(self.entries)


def harvest_catalog(manifest: SourceManifest, fetcher: Fetcher) -> HarvestResult:
    """Run a manifest's steps.

    For one-step sources every match of the pattern is an item; matches with an
    empty capture count toward ``all_items`` only. For two-step sources each
    followed link is an item.
    """
    cat = manifest.catalog
    first = manifest.steps[0]
    try:
        root = fetcher(first.fetch_url)
    except FetchError as exc:
        raise HarvestError(cat.id, f"root document unavailable: {exc}") from None

    if first.kind is StepKind.PATTERN_EXTRACT:
        caps = _captures(root, first)
        urls = [c for c in caps if c]
        return HarvestResult(tuple(RawRepositoryEntry(cat, u) for u in urls), len(caps))

    pages, failures = follow_links(root, first, fetcher)
    inner = manifest.steps[1]
    urls = [u for page in pages for u in extract_entries(page, inner)]
    return HarvestResult(tuple(RawRepositoryEntry(cat, u) for u in urls), len(pages), failures)


def decode(body: bytes) -> str:
    return body.decode("utf-8", errors="replace")


class FixtureFetcher:
    """Resolves ``file:<relative path>`` against a fixtures directory.

    Anything else is refused unless a live fetcher is chained behind it.
    """

    def __init__(self, root: str | Path, live: Fetcher | None = None):
        self.root = Path(root)
        self.live = live

    def __call__(self, url: str) -> str:
        if url.startswith(FILE_PREFIX):
            rel = url[len(FILE_PREFIX):]
            path = (self.root / rel).resolve()
            try:
                return decode(path.read_bytes())
            except OSError as exc:
                raise FetchError(f"{rel}: {exc.strerror}") from None
        if self.live is None:
            raise FetchError(f"network access disabled in fixture mode: {url}")
        return self.live(url)


class HttpFetcher:
    def __init__(self, user_agent: str, timeout: float = 60.0):
        self.user_agent = user_agent
        self.timeout = timeout

    def __call__(self, url: str) -> str:
        req = urllib.request.Request(url, headers={"User-Agent": self.user_agent})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return decode(resp.read())
        except urllib.error.HTTPError as exc:
            raise FetchError(f"HTTP {exc.code}") from None
        except (urllib.error.URLError, OSError) as exc:
            raise FetchError(str(getattr(exc, "reason", exc))) from None


def select(manifests: Sequence[SourceManifest], ids: Sequence[str] | None) -> list[SourceManifest]:
    if not ids:
        return list(manifests)
    known = {m.catalog.id for m in manifests}
    for i in ids:
        if i not in known:
            raise ConfigError(f"unknown catalog id {i!r}")
    return [m for m in manifests if m.catalog.id in set(ids)]
