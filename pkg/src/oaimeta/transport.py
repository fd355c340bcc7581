"""Clocks and HTTP transports used by the prober.

A transport is any callable ``(url, timeout) -> Response`` that raises
:class:`TransportError` when no HTTP response was obtained.
"""

from __future__ import annotations

import http.client
import socket
import ssl
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Callable, Mapping, Protocol

import yaml

BODY_CAP = 1 << 20

EPOCH = datetime(2017, 1, 1, tzinfo=timezone.utc)


class TransportError(Exception):
    pass


@dataclass(frozen=True)
class Response:
    status: int
    headers: Mapping[str, str] = field(default_factory=dict)
    body: bytes = b""
    # seconds the exchange took; only the simulated scheduler consumes it
    elapsed: float = 0.0

    def header(self, name: str) -> str | None:
        lname = name.lower()
        for k, v in self.headers.items():
            if k.lower() == lname:
                return v
        return None


Transport = Callable[[str, float], Response]


class Clock(Protocol):
    def monotonic(self) -> float: ...
    def sleep(self, seconds: float) -> None: ...
    def utcnow(self) -> datetime: ...


class SystemClock:
    def monotonic(self) -> float:
        return time.monotonic()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)

    def utcnow(self) -> datetime:
        return datetime.now(timezone.utc)


class VirtualClock:
    """Time that only moves when told to."""

    def __init__(self, start: datetime = EPOCH):
        self.start = start
        self.t = 0.0
        self._lock = threading.Lock()

    def monotonic(self) -> float:
        return self.t

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            with self._lock:
                self.t += seconds

    def advance_to(self, t: float) -> None:
        with self._lock:
            self.t = max(self.t, t)

    def utcnow(self) -> datetime:
        return self.start + timedelta(seconds=self.t)


class _NoRedirect(urllib.request.HTTPRedirectHandler):
    def redirect_request(self, req, fp, code, msg, headers, newurl):
        return None


class UrllibTransport:
    """Plain GET with a fixed User-Agent; redirects are left to the caller."""

    def __init__(self, user_agent: str, body_cap: int = BODY_CAP):
        self.user_agent = user_agent
        self.body_cap = body_cap
        self._opener = urllib.request.build_opener(_NoRedirect())

    def __call__(self, url: str, timeout: float) -> Response:
        req = urllib.request.Request(url, headers={"User-Agent": self.user_agent}, method="GET")
        start = time.monotonic()
        try:
            with self._opener.open(req, timeout=timeout) as resp:
                body = resp.read(self.body_cap)
                return Response(resp.status, dict(resp.headers.items()), body, time.monotonic() - start)
        except urllib.error.HTTPError as exc:
            try:
                body = exc.read(self.body_cap)
            except (OSError, http.client.HTTPException):
                body = b""
            headers = dict(exc.headers.items()) if exc.headers else {}
            return Response(exc.code, headers, body, time.monotonic() - start)
        except (urllib.error.URLError, socket.timeout, ssl.SSLError, OSError,
                http.client.HTTPException, ValueError) as exc:
            raise TransportError(str(getattr(exc, "reason", exc)) or type(exc).__name__) from None


class ScriptedTransport:
    """Replays canned responses keyed by exact request URL.

    Each script value is a response spec or a list of them consumed one per
    request (the last one repeats). A spec is a mapping with ``status`` plus
    ``body``/``body_file``/``headers``/``elapsed``, or ``{"error": msg}`` for a
    transport failure. Unknown URLs fail as refused connections.
    """

    def __init__(self, script: Mapping[str, object], base_dir: str | Path | None = None):
        self.base_dir = Path(base_dir) if base_dir else None
        self.script = {url: (list(v) if isinstance(v, list) else [v]) for url, v in script.items()}
        self._seen: dict[str, int] = {}
        self._lock = threading.Lock()
        self.calls: list[str] = []

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedTransport":
        path = Path(path)
        loader = getattr(yaml, "CSafeLoader", yaml.SafeLoader)
        data = yaml.load(path.read_text(encoding="utf-8"), Loader=loader) or {}
        return cls(data, path.parent)

    def _spec(self, url: str):
        with self._lock:
            self.calls.append(url)
            steps = self.script.get(url)
            if steps is None:
                return {"error": "connection refused"}
            n = self._seen.get(url, 0)
            self._seen[url] = n + 1
            return steps[min(n, len(steps) - 1)]

    def __call__(self, url: str, timeout: float) -> Response:
        spec = self._spec(url)
        if isinstance(spec, Response):
            return spec
        if "error" in spec:
            raise TransportError(str(spec["error"]))
        body = spec.get("body", b"")
        if "body_file" in spec:
            if self.base_dir is None:
                raise ValueError("body_file needs a base directory")
            body = (self.base_dir / spec["body_file"]).read_bytes()
        if isinstance(body, str):
            body = body.encode("utf-8")
        return Response(int(spec["status"]), dict(spec.get("headers") or {}), body[:BODY_CAP],
                        float(spec.get("elapsed", 0.0)))
