"""OAI-PMH availability probing through the Identify verb."""

from __future__ import annotations

import heapq
import itertools
import logging
import urllib.parse
import xml.etree.ElementTree as ET
from collections import Counter
from concurrent.futures import FIRST_COMPLETED, Future, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .model import CatalogSnapshot, NormalizedUrl, Outcome, ProbeRecord
from .normalize import strong_normalize
from .transport import BODY_CAP, Clock, Response, SystemClock, Transport, TransportError, UrllibTransport, VirtualClock

log = logging.getLogger(__name__)

DEFAULT_USER_AGENT = "oaimeta/0.1 (OAI-PMH Identify availability probe)"

RETRY_STATUSES = frozenset({500, 502, 503, 504})
REDIRECT_STATUSES = frozenset({301, 302, 303, 307, 308})

WRONG_SUCCESS = "wrong-200"
TRANSPORT = "transport"


@dataclass(frozen=True)
class ProbeConfig:
    max_in_flight: int = 64
    per_host_delay: float = 1000.0  # ms
    timeout: float = 30.0
    retries: int = 2
    retry_spacing: float = 3600.0  # s
    user_agent: str = DEFAULT_USER_AGENT
    follow_redirects: int = 5
    allow_tls: bool = True
    body_cap: int = BODY_CAP

    def __post_init__(self) -> None:
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.follow_redirects < 0:
            raise ValueError("follow_redirects must be >= 0")
        if self.retries < 0 or self.per_host_delay < 0 or self.retry_spacing < 0:
            raise ValueError("retries, per_host_delay and retry_spacing must be >= 0")


def build_identify_url(probe_url: str) -> str:
    if "?" in probe_url:
        raise ValueError(f"probe url must be simple-normalized (no query string): {probe_url!r}")
    return probe_url + "?verb=Identify"


@dataclass(frozen=True)
class Identity:
    repository_name: str | None = None
    protocol_version: str | None = None
    earliest_datestamp: str | None = None


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _parse_xml(body: bytes) -> ET.Element:
    # Identify responses never declare entities; refusing them blocks expansion bombs
    if b"<!ENTITY" in body:
        raise ValueError("entity declarations are not accepted")
    return ET.fromstring(body)


def classify_response(http_status: int, body: bytes) -> tuple[Outcome, Identity]:
    """Map a received response onto one of the probe outcomes."""
    if http_status != 200:
        return Outcome.HTTP_ERROR, Identity()
    try:
        root = _parse_xml(body)
    except (ET.ParseError, ValueError):
        return Outcome.WRONG_SUCCESS, Identity()
    if _local(root.tag) != "OAI-PMH":
        return Outcome.WRONG_SUCCESS, Identity()
    identify = None
    for child in root:
        name = _local(child.tag)
        if name == "error":
            return Outcome.WRONG_SUCCESS, Identity()
        if name == "Identify" and identify is None:
            identify = child
    if identify is None:
        return Outcome.WRONG_SUCCESS, Identity()

    fields: dict[str, str] = {}
    for child in identify:
        name = _local(child.tag)
        if name in ("repositoryName", "protocolVersion", "earliestDatestamp") and name not in fields:
            text = (child.text or "").strip()
            if text:
                fields[name] = text
    return Outcome.REACHABLE, Identity(
        fields.get("repositoryName"), fields.get("protocolVersion"), fields.get("earliestDatestamp")
    )


def host_of(url: str) -> str:
    return urllib.parse.urlsplit(url).netloc.lower() or url


@dataclass(order=True)
class _Job:
    not_before: float
    index: int
    url: str = field(compare=False)
    host: str = field(compare=False)
    attempts: int = field(default=0, compare=False)


def _exchange(url: str, config: ProbeConfig, transport: Transport) -> Response:
    """GET ``url``, following redirects up to the hop limit."""
    hops = 0
    while True:
        if not config.allow_tls and url.lower().startswith("https:"):
            raise TransportError("TLS disabled")
        resp = transport(url, config.timeout)
        location = resp.header("Location")
        if resp.status in REDIRECT_STATUSES and location and hops < config.follow_redirects:
            url = urllib.parse.urljoin(url, location)
            hops += 1
            continue
        return resp


class _SimRunner:
    """Discrete-event execution against a virtual clock.

    The transport is called at dispatch; the request stays outstanding until
    ``dispatch time + response.elapsed``.
    """

    def __init__(self, clock: VirtualClock):
        self.clock = clock
        self.heap: list = []
        self.seq = itertools.count()

    def __len__(self) -> int:
        return len(self.heap)

    def submit(self, job: _Job, fn) -> None:
        start = self.clock.monotonic()
        try:
            result = fn()
            done_at = start + max(result.elapsed, 0.0)
        except TransportError as exc:
            result = exc
            done_at = start
        heapq.heappush(self.heap, (done_at, next(self.seq), job, result))

    def wait(self, deadline: float | None) -> list:
        if not self.heap:
            if deadline is not None:
                self.clock.advance_to(deadline)
            return []
        target = self.heap[0][0] if deadline is None else min(self.heap[0][0], deadline)
        self.clock.advance_to(target)
        now = self.clock.monotonic()
        out = []
        while self.heap and self.heap[0][0] <= now:
            _, _, job, result = heapq.heappop(self.heap)
            out.append((job, result))
        return out

    def close(self) -> None:
        pass


class _ThreadRunner:
    def __init__(self, workers: int, clock: Clock):
        self.clock = clock
        self.pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="probe")
        self.futures: dict[Future, _Job] = {}

    def __len__(self) -> int:
        return len(self.futures)

    def submit(self, job: _Job, fn) -> None:
        self.futures[self.pool.submit(fn)] = job

    def wait(self, deadline: float | None) -> list:
        timeout = None if deadline is None else max(deadline - self.clock.monotonic(), 0.0)
        if not self.futures:
            if timeout:
                self.clock.sleep(timeout)
            return []
        done, _ = wait(list(self.futures), timeout=timeout, return_when=FIRST_COMPLETED)
        out = []
        for fut in sorted(done, key=lambda f: self.futures[f].index):
            job = self.futures.pop(fut)
            try:
                out.append((job, fut.result()))
            except TransportError as exc:
                out.append((job, exc))
        return out

    def close(self) -> None:
        self.pool.shutdown(wait=True)


def probe_all(
    urls: Sequence[str],
    config: ProbeConfig | None = None,
    clock: Clock | None = None,
    transport: Transport | None = None,
    *,
    threaded: bool | None = None,
) -> list[ProbeRecord]:
    """Probe every URL once (plus retries), politely.

    At most ``max_in_flight`` requests are outstanding, at most one per host,
    and consecutive dispatches to one host are ``per_host_delay`` ms apart.
    With a :class:`VirtualClock` (the default when ``threaded`` is None) the
    run is a single-threaded simulation and fully deterministic.
    """
    config = config or ProbeConfig()
    clock = clock or SystemClock()
    transport = transport or UrllibTransport(config.user_agent, config.body_cap)
    if threaded is None:
        threaded = not isinstance(clock, VirtualClock)
    if len(set(urls)) != len(urls):
        raise ValueError("probe urls must be deduplicated")
    if not urls:
        return []

    delay = config.per_host_delay / 1000.0
    queues: dict[str, list[_Job]] = {}
    keys = [strong_normalize(u) for u in urls]
    for i, u in enumerate(urls):
        build_identify_url(u)
        job = _Job(0.0, i, u, host_of(u))
        queues.setdefault(job.host, []).append(job)
    for q in queues.values():
        heapq.heapify(q)

    host_next: dict[str, float] = {}
    waiting: list[tuple[float, int, str]] = []  # (ready time, head index, host)
    ready: list[tuple[int, str]] = []
    for host, q in queues.items():
        heapq.heappush(waiting, (0.0, q[0].index, host))

    records: list[ProbeRecord | None] = [None] * len(urls)
    remaining = len(urls)
    runner = _ThreadRunner(config.max_in_flight, clock) if threaded else _SimRunner(clock)

    def attempt(url: str) -> Response:
        return _exchange(build_identify_url(url), config, transport)

    def requeue(host: str) -> None:
        q = queues[host]
        if q:
            heapq.heappush(waiting, (max(host_next.get(host, 0.0), q[0].not_before), q[0].index, host))

    try:
        while remaining:
            now = clock.monotonic()
            while waiting and waiting[0][0] <= now:
                _, idx, host = heapq.heappop(waiting)
                heapq.heappush(ready, (idx, host))
            while ready and len(runner) < config.max_in_flight:
                _, host = heapq.heappop(ready)
                job = heapq.heappop(queues[host])
                job.attempts += 1
                host_next[host] = now + delay
                runner.submit(job, lambda u=job.url: attempt(u))

            if not len(runner) and not waiting and not ready:
                raise RuntimeError("probe scheduler stalled")
            done = runner.wait(waiting[0][0] if waiting else None)
            for job, result in done:
                if isinstance(result, TransportError):
                    outcome, status, ident = Outcome.TRANSPORT_ERROR, None, Identity()
                else:
                    status = result.status
                    outcome, ident = classify_response(status, result.body[: config.body_cap])
                retryable = outcome is Outcome.TRANSPORT_ERROR or (
                    outcome is Outcome.HTTP_ERROR and status in RETRY_STATUSES
                )
                if retryable and job.attempts <= config.retries:
                    job.not_before = clock.monotonic() + config.retry_spacing
                    heapq.heappush(queues[job.host], job)
                else:
                    records[job.index] = ProbeRecord(
                        probe_url=job.url,
                        normalized=keys[job.index],
                        outcome=outcome,
                        http_status=status,
                        repository_name=ident.repository_name,
                        protocol_version=ident.protocol_version,
                        earliest_datestamp=ident.earliest_datestamp,
                        attempts=job.attempts,
                        completed_at=clock.utcnow(),
                    )
                    remaining -= 1
                requeue(job.host)
    finally:
        runner.close()
    return records  # type: ignore[return-value]


def error_bucket(record: ProbeRecord) -> str | None:
    if record.outcome is Outcome.REACHABLE:
        return None
    if record.outcome is Outcome.WRONG_SUCCESS:
        return WRONG_SUCCESS
    if record.outcome is Outcome.TRANSPORT_ERROR:
        return TRANSPORT
    return str(record.http_status)


def bucket_order(bucket: str) -> tuple[int, int]:
    if bucket.isdigit():
        return (0, int(bucket))
    return (1, 0) if bucket == WRONG_SUCCESS else (2, 0)


@dataclass(frozen=True)
class OutcomeSummary:
    total: int
    success_count: int
    error_counts: Mapping[str, int]

    @property
    def error_count(self) -> int:
        return self.total - self.success_count

    @property
    def success_fraction(self) -> float:
        return self.success_count / self.total if self.total else 0.0

    @property
    def error_fraction(self) -> float:
        return self.error_count / self.total if self.total else 0.0

    @property
    def error_fractions(self) -> dict[str, float]:
        n = self.error_count
        return {b: c / n for b, c in self.error_counts.items()} if n else {}


def summarize_outcomes(records: Iterable[ProbeRecord]) -> OutcomeSummary:
    total = 0
    success = 0
    buckets: Counter[str] = Counter()
    for r in records:
        total += 1
        b = error_bucket(r)
        if b is None:
            success += 1
        else:
            buckets[b] += 1
    ordered = {b: buckets[b] for b in sorted(buckets, key=bucket_order)}
    return OutcomeSummary(total, success, ordered)


@dataclass(frozen=True)
class CatalogProbeStats:
    """Per-catalog availability, with unique counted on strong keys of reachable entries."""

    catalog: str
    total: int
    success: int
    unique: int

    @property
    def success_pct(self) -> float:
        return 100.0 * self.success / self.total if self.total else 0.0

    @property
    def error_pct(self) -> float:
        return 100.0 * (self.total - self.success) / self.total if self.total else 0.0


def index_records(records: Iterable[ProbeRecord]) -> dict[str, ProbeRecord]:
    return {r.probe_url: r for r in records}


def catalog_stats(snapshot: CatalogSnapshot, by_url: Mapping[str, ProbeRecord]) -> CatalogProbeStats:
    success = 0
    keys: set[NormalizedUrl] = set()
    for url in snapshot.entries_simple:
        rec = by_url.get(url)
        if rec is None:
            raise KeyError(f"{snapshot.catalog.id}: no probe record for {url}")
        if rec.reachable:
            success += 1
            keys.add(rec.normalized)
    return CatalogProbeStats(snapshot.catalog.id, len(snapshot.entries_simple), success, len(keys))


def union_probe_urls(snapshots: Iterable[CatalogSnapshot]) -> list[str]:
    seen: dict[str, None] = {}
    for s in snapshots:
        for u in s.entries_simple:
            seen.setdefault(u, None)
    return list(seen)
