from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import T0, snapshot
import corpus_kit as kit
from oaimeta.model import CatalogId, NormalizedUrl, Outcome, ProbeRecord
from oaimeta.normalize import build_snapshot
from oaimeta.prober import (
    TRANSPORT,
    WRONG_SUCCESS,
    ProbeConfig,
    build_identify_url,
    catalog_stats,
    classify_response,
    error_bucket,
    index_records,
    probe_all,
    summarize_outcomes,
    union_probe_urls,
)
from oaimeta.transport import Response, ScriptedTransport, TransportError, VirtualClock

IDENTIFY = kit.identify_xml("http://x.org/oai", "X Repository").encode()
HTML = b"<html><body>Moved</body></html>"
FAST = ProbeConfig(per_host_delay=0, retry_spacing=0)


def test_build_identify_url():
    assert build_identify_url("http://x.org/oai") == "http://x.org/oai?verb=Identify"
    with pytest.raises(ValueError):
        build_identify_url("http://x.org/oai?set=a")


def test_classify_reachable_extracts_identity():
    outcome, ident = classify_response(200, IDENTIFY)
    assert outcome is Outcome.REACHABLE
    assert ident.repository_name == "X Repository"
    assert ident.protocol_version == "2.0"
    assert ident.earliest_datestamp == "2005-01-01"


def test_classify_without_namespace_prefix():
    body = b"<OAI-PMH><Identify><repositoryName>R</repositoryName></Identify></OAI-PMH>"
    outcome, ident = classify_response(200, body)
    assert outcome is Outcome.REACHABLE and ident.repository_name == "R" and ident.protocol_version is None


@pytest.mark.parametrize(
    "body",
    [
        HTML,
        b"",
        b"not xml at all",
        b"<OAI-PMH><error code='badVerb'>x</error></OAI-PMH>",
        b"<OAI-PMH><ListRecords/></OAI-PMH>",
        b"<Identify><repositoryName>R</repositoryName></Identify>",
        b'<?xml version="1.0"?><!DOCTYPE r [<!ENTITY a "aaaa">]><OAI-PMH><Identify/></OAI-PMH>',
    ],
)
def test_classify_wrong_success(body):
    assert classify_response(200, body)[0] is Outcome.WRONG_SUCCESS


@pytest.mark.parametrize("code", [301, 400, 403, 404, 500, 503])
def test_classify_http_error_ignores_body(code):
    assert classify_response(code, IDENTIFY)[0] is Outcome.HTTP_ERROR


def test_probe_all_three_urls():
    urls = ["http://a.org/oai", "http://b.org/oai", "http://c.org/oai"]
    script = {
        "http://a.org/oai?verb=Identify": {"status": 200, "body": IDENTIFY},
        "http://b.org/oai?verb=Identify": {"status": 404},
        "http://c.org/oai?verb=Identify": {"status": 200, "body": HTML},
    }
    recs = probe_all(urls, FAST, VirtualClock(), ScriptedTransport(script))
    assert [r.probe_url for r in recs] == urls
    assert [r.outcome for r in recs] == [Outcome.REACHABLE, Outcome.HTTP_ERROR, Outcome.WRONG_SUCCESS]
    assert [r.http_status for r in recs] == [200, 404, 200]
    assert [r.normalized.key for r in recs] == ["a.org/oai", "b.org/oai", "c.org/oai"]


def test_probe_all_retries_transient():
    url = "http://a.org/oai"
    script = {url + "?verb=Identify": [{"status": 503}, {"status": 200, "body": IDENTIFY}]}
    clock = VirtualClock()
    [rec] = probe_all([url], ProbeConfig(retry_spacing=3600), clock, ScriptedTransport(script))
    assert rec.outcome is Outcome.REACHABLE and rec.attempts == 2
    assert clock.monotonic() == 3600


def test_probe_all_gives_up_after_retries():
    url = "http://a.org/oai"
    t = ScriptedTransport({url + "?verb=Identify": {"status": 500}})
    [rec] = probe_all([url], ProbeConfig(retries=2, retry_spacing=1), VirtualClock(), t)
    assert (rec.outcome, rec.http_status, rec.attempts) == (Outcome.HTTP_ERROR, 500, 3)
    assert len(t.calls) == 3


def test_probe_all_does_not_retry_404():
    t = ScriptedTransport({"http://a.org/oai?verb=Identify": {"status": 404}})
    [rec] = probe_all(["http://a.org/oai"], FAST, VirtualClock(), t)
    assert rec.attempts == 1 and len(t.calls) == 1


def test_probe_all_refused_is_transport_error():
    [rec] = probe_all(["http://gone.org/oai"], ProbeConfig(retries=1, retry_spacing=0), VirtualClock(),
                      ScriptedTransport({}))
    assert (rec.outcome, rec.http_status, rec.attempts) == (Outcome.TRANSPORT_ERROR, None, 2)


def test_probe_all_empty_and_duplicates():
    assert probe_all([], FAST, VirtualClock(), ScriptedTransport({})) == []
    with pytest.raises(ValueError):
        probe_all(["http://a.org", "http://a.org"], FAST, VirtualClock(), ScriptedTransport({}))


def test_redirect_followed_within_one_probe():
    script = {
        "http://a.org/oai?verb=Identify": {"status": 301, "headers": {"Location": "https://a.org/oai?verb=Identify"}},
        "https://a.org/oai?verb=Identify": {"status": 200, "body": IDENTIFY},
    }
    [rec] = probe_all(["http://a.org/oai"], FAST, VirtualClock(), ScriptedTransport(script))
    assert rec.outcome is Outcome.REACHABLE and rec.attempts == 1


def test_redirect_limit_and_tls_switch():
    loop = {"http://a.org/oai?verb=Identify": {"status": 302, "headers": {"Location": "/oai?verb=Identify"}}}
    [rec] = probe_all(["http://a.org/oai"], ProbeConfig(follow_redirects=3, per_host_delay=0),
                      VirtualClock(), ScriptedTransport(loop))
    assert (rec.outcome, rec.http_status) == (Outcome.HTTP_ERROR, 302)

    tls = {"https://a.org/oai?verb=Identify": {"status": 200, "body": IDENTIFY}}
    [rec] = probe_all(["https://a.org/oai"], ProbeConfig(allow_tls=False, retries=0),
                      VirtualClock(), ScriptedTransport(tls))
    assert rec.outcome is Outcome.TRANSPORT_ERROR


def test_body_cap_truncates_before_classification():
    t = ScriptedTransport({"http://a.org/oai?verb=Identify": {"status": 200, "body": IDENTIFY}})
    [rec] = probe_all(["http://a.org/oai"], ProbeConfig(body_cap=50), VirtualClock(), t)
    assert rec.outcome is Outcome.WRONG_SUCCESS


def test_probe_is_deterministic_under_virtual_clock():
    urls = [f"http://h{i % 5}.org/oai/{i}" for i in range(40)]
    script = {u + "?verb=Identify": [{"status": 503}, {"status": 200, "body": IDENTIFY, "elapsed": 0.3}]
              for u in urls[::3]}
    runs = [probe_all(urls, ProbeConfig(max_in_flight=3), VirtualClock(), ScriptedTransport(script))
            for _ in range(2)]
    assert runs[0] == runs[1]


def test_threaded_runner_matches_outcomes():
    urls = [f"http://h{i % 4}.org/oai/{i}" for i in range(12)]
    script = {u + "?verb=Identify": {"status": 200, "body": IDENTIFY} for u in urls[::2]}
    recs = probe_all(urls, ProbeConfig(max_in_flight=4, per_host_delay=0, retries=0),
                     transport=ScriptedTransport(script))
    assert [r.reachable for r in recs] == [i % 2 == 0 for i in range(12)]


class _Flaky:
    """Transport raising non-HTTP failures for every call."""

    def __call__(self, url, timeout):
        raise TransportError("timed out")


def test_timeout_maps_to_transport_error():
    [rec] = probe_all(["http://a.org/oai"], ProbeConfig(retries=0), VirtualClock(), _Flaky())
    assert rec.outcome is Outcome.TRANSPORT_ERROR


responses = st.one_of(
    st.builds(Response, st.integers(100, 599), st.just({}), st.binary(max_size=200)),
    st.builds(Response, st.just(200), st.just({}),
              st.sampled_from([IDENTIFY, HTML, b"<OAI-PMH/>", b"<a><b>"])),
    st.none(),
)


@settings(max_examples=200)
@given(st.lists(responses, min_size=1, max_size=15))
def test_probe_all_total_and_valid(resps):
    urls = [f"http://h{i}.org/oai" for i in range(len(resps))]
    script = {u + "?verb=Identify": r for u, r in zip(urls, resps) if r is not None}
    recs = probe_all(urls, ProbeConfig(retries=1, retry_spacing=0, follow_redirects=0),
                     VirtualClock(), ScriptedTransport(script))
    assert len(recs) == len(urls)
    for r, resp in zip(recs, resps):
        assert isinstance(r, ProbeRecord)
        if resp is None:
            assert r.outcome is Outcome.TRANSPORT_ERROR
        else:
            assert r.http_status == resp.status


# -- summaries ---------------------------------------------------------

def rec(outcome, status=None, key="x.org/oai"):
    return ProbeRecord("http://" + key, NormalizedUrl(key), outcome, status)


def test_error_buckets():
    assert error_bucket(rec(Outcome.REACHABLE, 200)) is None
    assert error_bucket(rec(Outcome.WRONG_SUCCESS, 200)) == WRONG_SUCCESS
    assert error_bucket(rec(Outcome.TRANSPORT_ERROR)) == TRANSPORT
    assert error_bucket(rec(Outcome.HTTP_ERROR, 404)) == "404"


def test_summarize_examples():
    rs = [rec(Outcome.REACHABLE, 200)] * 3 + [rec(Outcome.HTTP_ERROR, 500)] * 2 + [rec(Outcome.WRONG_SUCCESS, 200)]
    s = summarize_outcomes(rs)
    assert (s.total, s.success_count, s.error_count) == (6, 3, 3)
    assert s.error_fractions == {"500": 2 / 3, WRONG_SUCCESS: 1 / 3}
    assert list(s.error_counts) == ["500", WRONG_SUCCESS]
    empty = summarize_outcomes([])
    assert (empty.total, empty.error_fractions, empty.success_fraction) == (0, {}, 0.0)


def test_summarize_orders_codes_numerically():
    rs = [rec(Outcome.TRANSPORT_ERROR), rec(Outcome.HTTP_ERROR, 503), rec(Outcome.WRONG_SUCCESS, 200),
          rec(Outcome.HTTP_ERROR, 404)]
    assert list(summarize_outcomes(rs).error_counts) == ["404", "503", WRONG_SUCCESS, TRANSPORT]


def test_catalog_stats_counts_reachable_unique_keys():
    s = build_snapshot(CatalogId("a"), ["http://x.org/oai", "http://www.x.org/oai", "http://y.org/oai"], 3, T0)
    by_url = index_records([
        ProbeRecord("http://x.org/oai", NormalizedUrl("x.org/oai"), Outcome.REACHABLE, 200),
        ProbeRecord("http://www.x.org/oai", NormalizedUrl("x.org/oai"), Outcome.REACHABLE, 200),
        ProbeRecord("http://y.org/oai", NormalizedUrl("y.org/oai"), Outcome.HTTP_ERROR, 404),
    ])
    st_ = catalog_stats(s, by_url)
    assert (st_.total, st_.success, st_.unique) == (3, 2, 1)
    assert round(st_.success_pct, 3) == 66.667
    with pytest.raises(KeyError):
        catalog_stats(snapshot("b", ["z.org"]), by_url)


def test_union_probe_urls_keeps_first_order():
    a, b = snapshot("a", ["x.org", "y.org"]), snapshot("b", ["y.org", "z.org"])
    assert union_probe_urls([a, b]) == ["http://x.org", "http://y.org", "http://z.org"]
