"""Append-only run directories.

Layout of ``<root>/<run-id>/``::

    run.json              run metadata
    manifest.yaml         copy of the source manifest
    entries/<id>.jsonl    one snapshot per catalog: header line, then one entry per line
    probes.jsonl          one ProbeRecord per line
    probe-config.json     settings the probe pass ran with
    *.csv, *.json         reports

Files are only ever added, never rewritten.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import secrets
import shutil
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping

from .model import CatalogId, CatalogSnapshot, NormalizedUrl, Outcome, ProbeRecord

log = logging.getLogger(__name__)

META = "run.json"
MANIFEST = "manifest.yaml"
ENTRIES_DIR = "entries"
PROBES = "probes.jsonl"
PROBE_CONFIG = "probe-config.json"
REPORT_SUFFIXES = (".csv", ".json")
FORMAT_VERSION = 1


class StoreError(Exception):
    pass


class ImmutableRunError(StoreError):
    pass


class LoadError(StoreError):
    def __init__(self, path: Path | str, line: int | None, message: str):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class RunMeta:
    run_id: str
    started_at: datetime
    finished_at: datetime
    mode: str
    config_digest: str
    catalog_order: tuple[str, ...] = ()
    failed: tuple[str, ...] = ()
    fixtures_dir: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "format": FORMAT_VERSION,
            "run_id": self.run_id,
            "started_at": _ts(self.started_at),
            "finished_at": _ts(self.finished_at),
            "mode": self.mode,
            "config_digest": self.config_digest,
            "catalog_order": list(self.catalog_order),
            "failed": list(self.failed),
            "fixtures_dir": self.fixtures_dir,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "RunMeta":
        return cls(
            run_id=d["run_id"],
            started_at=_parse_ts(d["started_at"]),
            finished_at=_parse_ts(d["finished_at"]),
            mode=d["mode"],
            config_digest=d["config_digest"],
            catalog_order=tuple(d.get("catalog_order", ())),
            failed=tuple(d.get("failed", ())),
            fixtures_dir=d.get("fixtures_dir"),
        )


@dataclass(frozen=True)
class Run:
    meta: RunMeta
    manifest_text: str | None = None
    snapshots: tuple[CatalogSnapshot, ...] = ()
    probes: tuple[ProbeRecord, ...] | None = None
    probe_config: Mapping[str, Any] | None = None
    reports: Mapping[str, str] = field(default_factory=dict)


def new_run_id(now: datetime | None = None) -> str:
    now = now or datetime.now(timezone.utc)
    return now.strftime("%Y%m%dT%H%M%SZ") + "-" + secrets.token_hex(3)


def digest(*parts: str) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(p.encode("utf-8"))
        h.update(b"\0")
    return h.hexdigest()[:16]


def _ts(dt: datetime | None) -> str | None:
    return None if dt is None else dt.astimezone(timezone.utc).isoformat()


def _parse_ts(s: str | None) -> datetime | None:
    return None if s is None else datetime.fromisoformat(s)


# -- records ------------------------------------------------------------


def snapshot_lines(s: CatalogSnapshot) -> Iterator[dict[str, Any]]:
    yield {
        "type": "snapshot",
        "catalog": s.catalog.id,
        "display_name": s.catalog.display_name,
        "harvested_at": _ts(s.harvested_at),
        "all_items": s.all_items,
        "only_oai": s.only_oai,
    }
    for u in s.entries_simple:
        yield {"type": "simple", "url": u}
    for k in s.entries_strong:
        yield {"type": "strong", "key": k.key}


def probe_to_dict(r: ProbeRecord) -> dict[str, Any]:
    return {
        "probe_url": r.probe_url,
        "normalized": r.normalized.key,
        "outcome": r.outcome.value,
        "http_status": r.http_status,
        "repository_name": r.repository_name,
        "protocol_version": r.protocol_version,
        "earliest_datestamp": r.earliest_datestamp,
        "attempts": r.attempts,
        "completed_at": _ts(r.completed_at),
    }


def probe_from_dict(d: Mapping[str, Any]) -> ProbeRecord:
    return ProbeRecord(
        probe_url=d["probe_url"],
        normalized=NormalizedUrl(d["normalized"]),
        outcome=Outcome(d["outcome"]),
        http_status=d["http_status"],
        repository_name=d.get("repository_name"),
        protocol_version=d.get("protocol_version"),
        earliest_datestamp=d.get("earliest_datestamp"),
        attempts=d["attempts"],
        completed_at=_parse_ts(d.get("completed_at")),
    )


def _dump_lines(records: Iterable[Mapping[str, Any]]) -> str:
    return "".join(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n" for r in records)


def _read_lines(path: Path, lenient: bool) -> Iterator[tuple[int, dict[str, Any]]]:
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise LoadError(path, None, f"unreadable: {exc}") from None
    for n, line in enumerate(text.split("\n"), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise ValueError("record is not an object")
        except ValueError as exc:
            if lenient:
                log.warning("%s:%d: skipping corrupt record (%s)", path, n, exc)
                continue
            raise LoadError(path, n, f"corrupt record: {exc}") from None
        yield n, obj


def _load_snapshot(path: Path, lenient: bool) -> CatalogSnapshot:
    header = None
    simple: list[str] = []
    strong: list[NormalizedUrl] = []
    for n, rec in _read_lines(path, lenient):
        try:
            kind = rec["type"]
            if kind == "snapshot":
                if header is not None:
                    raise ValueError("second snapshot header")
                header = rec
            elif kind == "simple":
                simple.append(rec["url"])
            elif kind == "strong":
                strong.append(NormalizedUrl(rec["key"]))
            else:
                raise ValueError(f"unknown record type {kind!r}")
        except (KeyError, ValueError) as exc:
            if lenient:
                log.warning("%s:%d: skipping bad record (%s)", path, n, exc)
                continue
            raise LoadError(path, n, f"bad record: {exc}") from None
    if header is None:
        raise LoadError(path, None, "missing snapshot header")
    try:
        return CatalogSnapshot(
            catalog=CatalogId(header["catalog"], header.get("display_name") or ""),
            harvested_at=_parse_ts(header["harvested_at"]),
            all_items=header["all_items"],
            only_oai=header["only_oai"],
            entries_simple=tuple(simple),
            entries_strong=tuple(strong),
        )
    except (KeyError, ValueError) as exc:
        raise LoadError(path, 1, f"invalid snapshot: {exc}") from None


def _load_probes(path: Path, lenient: bool) -> tuple[ProbeRecord, ...]:
    out = []
    for n, rec in _read_lines(path, lenient):
        try:
            out.append(probe_from_dict(rec))
        except (KeyError, ValueError, TypeError) as exc:
            if lenient:
                log.warning("%s:%d: skipping bad probe record (%s)", path, n, exc)
                continue
            raise LoadError(path, n, f"bad probe record: {exc}") from None
    return tuple(out)


# -- save / load --------------------------------------------------------


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def run_files(run: Run) -> dict[str, str]:
    files = {META: json.dumps(run.meta.to_dict(), indent=2) + "\n"}
    if run.manifest_text is not None:
        files[MANIFEST] = run.manifest_text
    for s in run.snapshots:
        files[f"{ENTRIES_DIR}/{s.catalog.id}.jsonl"] = _dump_lines(snapshot_lines(s))
    if run.probes is not None:
        files[PROBES] = _dump_lines(probe_to_dict(r) for r in run.probes)
    if run.probe_config is not None:
        files[PROBE_CONFIG] = json.dumps(dict(run.probe_config), indent=2, sort_keys=True) + "\n"
    for name, text in run.reports.items():
        if "/" in name or not name.endswith(REPORT_SUFFIXES) or name in (META, PROBE_CONFIG):
            raise StoreError(f"invalid report file name {name!r}")
        files[name] = text
    return files


def save_run(run: Run, root: str | Path) -> str:
    """Write ``run`` as a new directory under ``root``; returns the run id."""
    root = Path(root)
    run_id = run.meta.run_id or new_run_id()
    if run_id != run.meta.run_id:
        run = Run(**{**run.__dict__, "meta": RunMeta(**{**run.meta.__dict__, "run_id": run_id})})
    final = root / run_id
    if final.exists():
        raise ImmutableRunError(f"run directory already exists: {final}")
    try:
        root.mkdir(parents=True, exist_ok=True)
        tmp = Path(tempfile.mkdtemp(prefix=f".{run_id}.", dir=root))
    except OSError as exc:
        raise StoreError(f"cannot write under {root}: {exc.strerror}") from None
    try:
        for name, text in run_files(run).items():
            _write(tmp / name, text)
        os.rename(tmp, final)
    except OSError as exc:
        shutil.rmtree(tmp, ignore_errors=True)
        raise StoreError(f"failed to save run {run_id}: {exc}") from None
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return run_id


def add_files(run_dir: str | Path, files: Mapping[str, str]) -> None:
    """Add new files to an existing run; refuses to touch existing ones."""
    run_dir = Path(run_dir)
    if not (run_dir / META).is_file():
        raise StoreError(f"not a run directory: {run_dir}")
    clash = sorted(n for n in files if (run_dir / n).exists())
    if clash:
        raise ImmutableRunError(f"{run_dir}: already contains {', '.join(clash)}")
    written = []
    try:
        for name, text in files.items():
            tmp = run_dir / f".{name}.partial"
            _write(tmp, text)
            os.rename(tmp, run_dir / name)
            written.append(run_dir / name)
    except OSError as exc:
        for p in written:
            p.unlink(missing_ok=True)
        raise StoreError(f"failed to add files to {run_dir}: {exc}") from None


def add_probes(run_dir: str | Path, records: Iterable[ProbeRecord], config: Mapping[str, Any]) -> None:
    add_files(run_dir, {
        PROBES: _dump_lines(probe_to_dict(r) for r in records),
        PROBE_CONFIG: json.dumps(dict(config), indent=2, sort_keys=True) + "\n",
    })


def load_run(path: str | Path, lenient: bool = False) -> Run:
    path = Path(path)
    meta_path = path / META
    try:
        meta = RunMeta.from_dict(json.loads(meta_path.read_text(encoding="utf-8")))
    except FileNotFoundError:
        raise LoadError(meta_path, None, "missing run metadata") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise LoadError(meta_path, None, f"corrupt run metadata: {exc}") from None

    known = {META, MANIFEST, PROBES, PROBE_CONFIG, ENTRIES_DIR}
    manifest_text = None
    if (path / MANIFEST).is_file():
        manifest_text = (path / MANIFEST).read_text(encoding="utf-8")

    snapshots = []
    entries_dir = path / ENTRIES_DIR
    for cid in meta.catalog_order:
        f = entries_dir / f"{cid}.jsonl"
        if f.is_file():
            snapshots.append(_load_snapshot(f, lenient))
        elif cid not in meta.failed:
            raise LoadError(f, None, "missing entry file")
    if entries_dir.is_dir():
        expected = {f"{c}.jsonl" for c in meta.catalog_order}
        for extra in sorted(p.name for p in entries_dir.iterdir() if p.name not in expected):
            log.warning("%s: ignoring unknown file %s", path, f"{ENTRIES_DIR}/{extra}")

    probes = _load_probes(path / PROBES, lenient) if (path / PROBES).is_file() else None
    probe_config = None
    if (path / PROBE_CONFIG).is_file():
        try:
            probe_config = json.loads((path / PROBE_CONFIG).read_text(encoding="utf-8"))
        except ValueError as exc:
            raise LoadError(path / PROBE_CONFIG, None, f"corrupt: {exc}") from None

    reports = {}
    for p in sorted(path.iterdir()):
        if p.name in known or p.name.startswith("."):
            continue
        if p.is_file() and p.name.endswith(REPORT_SUFFIXES):
            reports[p.name] = p.read_text(encoding="utf-8")
        else:
            log.warning("%s: ignoring unknown file %s", path, p.name)

    return Run(meta, manifest_text, tuple(snapshots), probes, probe_config, reports)
