"""Command-line entry point: harvest -> probe -> analyze, plus run diffing.

Exit codes: 0 success, 1 usage or configuration error, 2 partial harvest
failure, 3 refusal to modify an existing run.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from . import report as rp
from .model import ConfigError
from .normalize import build_snapshot
from .overlap import analyze, build_membership, exclude_catalog
from .prober import DEFAULT_USER_AGENT, ProbeConfig, catalog_stats, index_records, probe_all, summarize_outcomes, union_probe_urls
from .sources import FixtureFetcher, HarvestError, HttpFetcher, ManifestError, harvest_catalog, parse_manifest, select
from .store import ImmutableRunError, LoadError, Run, RunMeta, StoreError, add_files, add_probes, digest, load_run, save_run
from .transport import ScriptedTransport, SystemClock, UrllibTransport, VirtualClock

log = logging.getLogger("oaimeta")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARTIAL = 2
EXIT_IMMUTABLE = 3

RESPONSES_FILE = "responses.yaml"


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        self.code = code
        super().__init__(message)


def _user_agent(arg: str | None) -> str:
    return arg or os.environ.get("OMH_USER_AGENT") or DEFAULT_USER_AGENT


def _load(run_dir: str) -> Run:
    try:
        return load_run(run_dir)
    except LoadError as exc:
        raise CliError(str(exc)) from None


def cmd_harvest(args: argparse.Namespace) -> int:
    manifest_path = Path(args.manifest)
    try:
        text = manifest_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"{manifest_path}: {exc.strerror}") from None
    try:
        manifests = select(parse_manifest(text, str(manifest_path)), args.catalog)
    except ConfigError as exc:
        raise CliError(str(exc)) from None

    fixtures = Path(args.fixtures) if args.fixtures else manifest_path.parent
    live = HttpFetcher(_user_agent(args.user_agent)) if args.live else None
    fetcher = FixtureFetcher(fixtures, live)

    started = datetime.now(timezone.utc)
    snapshots, failed = [], []
    for m in manifests:
        try:
            res = harvest_catalog(m, fetcher)
        except HarvestError as exc:
            log.error("harvest failed: %s", exc)
            failed.append(m.catalog.id)
            continue
        snap = build_snapshot(m.catalog, [e.raw_url for e in res.entries], res.all_items,
                              datetime.now(timezone.utc))
        if res.link_failures:
            log.warning("%s: %d linked page(s) could not be fetched", m.catalog.id, res.link_failures)
        snapshots.append(snap)
        print(f"{m.catalog.id}: all_items={snap.all_items} only_oai={snap.only_oai} unique={snap.unique}")

    meta = RunMeta(
        run_id="",
        started_at=started,
        finished_at=datetime.now(timezone.utc),
        mode="live" if args.live else "fixture",
        config_digest=digest(text, ",".join(m.catalog.id for m in manifests)),
        catalog_order=tuple(m.catalog.id for m in manifests),
        failed=tuple(failed),
        fixtures_dir=str(fixtures.resolve()),
    )
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        run_id = save_run(Run(meta, text, tuple(snapshots)), out)
    except (OSError, StoreError) as exc:
        raise CliError(f"cannot save run: {exc}") from None
    print(out / run_id)
    if failed:
        print(f"failed catalogs: {', '.join(failed)}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_probe(args: argparse.Namespace) -> int:
    run = _load(args.run)
    if run.probes is not None:
        raise CliError(f"{args.run}: run already probed; runs are immutable", EXIT_IMMUTABLE)
    if not run.snapshots:
        raise CliError(f"{args.run}: run has no snapshots")
    try:
        config = ProbeConfig(
            max_in_flight=args.concurrency,
            per_host_delay=args.per_host_delay,
            timeout=args.timeout,
            retries=args.retries,
            retry_spacing=args.retry_spacing,
            user_agent=_user_agent(args.user_agent),
        )
    except ValueError as exc:
        raise CliError(str(exc)) from None

    if args.live:
        transport, clock = UrllibTransport(config.user_agent, config.body_cap), SystemClock()
    else:
        responses = Path(args.responses) if args.responses else Path(run.meta.fixtures_dir or ".") / RESPONSES_FILE
        if not responses.is_file():
            raise CliError(f"fixture mode needs scripted responses: {responses} not found (or pass --live)")
        transport, clock = ScriptedTransport.from_file(responses), VirtualClock()

    urls = union_probe_urls(run.snapshots)
    records = probe_all(urls, config, clock, transport)
    try:
        add_probes(args.run, records, {**asdict(config), "mode": "live" if args.live else "fixture"})
    except ImmutableRunError as exc:
        raise CliError(str(exc), EXIT_IMMUTABLE) from None
    except StoreError as exc:
        raise CliError(str(exc)) from None

    summary = summarize_outcomes(records)
    print(f"probed {summary.total} urls: {summary.success_count} reachable, {summary.error_count} errors")
    for bucket, n in summary.error_counts.items():
        print(f"  {rp.bucket_label(bucket)}: {n}")
    return EXIT_OK


def analysis_files(run: Run, include_unreachable: bool, excluded: Sequence[str]) -> dict[str, str]:
    reachable_only = not include_unreachable
    if reachable_only and run.probes is None:
        raise CliError("run has no probe records; run `oaimeta probe` first or pass --include-unreachable")
    snapshots = list(run.snapshots)
    if not snapshots:
        raise CliError("run has no snapshots")
    files = {rp.COUNTS_CSV: rp.emit_count_table(snapshots).to_csv()}
    if run.probes is not None:
        by_url = index_records(run.probes)
        try:
            stats = [catalog_stats(s, by_url) for s in snapshots]
        except KeyError as exc:
            raise CliError(str(exc.args[0])) from None
        tables = rp.emit_probe_table(stats, summarize_outcomes(run.probes))
        files[rp.PROBES_CSV] = tables.probes.to_csv()
        files[rp.ERRORS_CSV] = tables.errors.to_csv()

    try:
        mm = build_membership(snapshots, reachable_only, run.probes or ())
        variants = [("", mm)]
        for ex in excluded:
            variants.append((f".without-{ex}", exclude_catalog(mm, ex)))
    except ConfigError as exc:
        raise CliError(str(exc)) from None

    for suffix, m in variants:
        rep = analyze(m)
        files[f"overlap{suffix}.json"] = rp.overlap_json(rep)
        files[f"regions{suffix}.csv"] = rp.regions_table(rep).to_csv()
    return files


def cmd_analyze(args: argparse.Namespace) -> int:
    run = _load(args.run)
    files = analysis_files(run, args.include_unreachable, args.exclude_catalog or [])
    try:
        add_files(args.run, files)
    except ImmutableRunError as exc:
        raise CliError(str(exc), EXIT_IMMUTABLE) from None
    except StoreError as exc:
        raise CliError(str(exc)) from None
    doc = json.loads(files[rp.OVERLAP_JSON])
    spec = doc["specificity"]
    print(f"distinct keys: {doc['total_distinct']}")
    print(f"specific to one catalog: {spec['count']} ({100 * spec['fraction']:.1f}%)")
    print(f"listed by every catalog: {doc['all_common']['count']}")
    for name in sorted(files):
        print(f"wrote {Path(args.run) / name}")
    return EXIT_OK


def cmd_diff(args: argparse.Namespace) -> int:
    earlier, later = _load(args.earlier), _load(args.later)
    try:
        table = rp.diff_runs(earlier.snapshots, later.snapshots)
    except rp.DiffError as exc:
        raise CliError(str(exc)) from None
    text = table.to_csv()
    sys.stdout.write(text)
    out = Path(args.out)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise CliError(f"{out}: {exc.strerror}") from None
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oaimeta", description="OAI-PMH meta-catalog harvesting and overlap analysis")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    h = sub.add_parser("harvest", help="harvest catalog listings into a new run")
    h.add_argument("--manifest", required=True)
    h.add_argument("--out", required=True, help="directory that receives the run directory")
    h.add_argument("--fixtures", help="directory resolving file: URLs (default: the manifest's directory)")
    h.add_argument("--catalog", action="append", metavar="ID")
    h.add_argument("--live", action="store_true", help="allow HTTP fetches")
    h.add_argument("--user-agent")
    h.set_defaults(func=cmd_harvest)

    pr = sub.add_parser("probe", help="probe every harvested URL with ?verb=Identify")
    pr.add_argument("--run", required=True)
    pr.add_argument("--concurrency", type=int, default=64)
    pr.add_argument("--timeout", type=float, default=30.0)
    pr.add_argument("--retries", type=int, default=2)
    pr.add_argument("--user-agent")
    pr.add_argument("--per-host-delay", type=float, default=1000.0, metavar="MS")
    pr.add_argument("--retry-spacing", type=float, default=3600.0, metavar="S")
    pr.add_argument("--live", action="store_true")
    pr.add_argument("--responses", help="scripted responses file for fixture mode")
    pr.set_defaults(func=cmd_probe)

    a = sub.add_parser("analyze", help="compute overlap reports for a run")
    a.add_argument("--run", required=True)
    a.add_argument("--exclude-catalog", action="append", metavar="ID")
    a.add_argument("--include-unreachable", action="store_true")
    a.set_defaults(func=cmd_analyze)

    d = sub.add_parser("diff", help="compare two runs")
    d.add_argument("--earlier", required=True)
    d.add_argument("--later", required=True)
    d.add_argument("--out", default=rp.DIFF_CSV)
    d.set_defaults(func=cmd_diff)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"oaimeta: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
