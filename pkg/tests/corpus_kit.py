"""Render URL lists in each meta-catalog's native listing format.

A fixture corpus is a directory holding a manifest with ``file:`` URLs, one
listing per catalog and a ``responses.yaml`` script for the prober.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import yaml

DUMPER = getattr(yaml, "CSafeDumper", yaml.SafeDumper)

HERE = Path(__file__).parent
SHARED = [line.strip() for line in (HERE / "data" / "shared47.txt").read_text().splitlines() if line.strip()]

CATALOGS = ["opendoar", "roar", "openarchives", "illinois", "oaister", "openaire"]
DISPLAY = {
    "opendoar": "OpenDOAR", "roar": "ROAR", "openarchives": "OpenArchives",
    "illinois": "Illinois", "oaister": "OAIster", "openaire": "OpenAIRE",
}

PATTERNS = {
    "opendoar": ("<rOaiBaseUrl>(.*?)</rOaiBaseUrl>", 1),
    "roar": ("<oai_pmh>(.*?)</oai_pmh>", 1),
    "openarchives": ("<baseURL(.*?)>(.*?)</baseURL>", 2),
    "illinois": ("<baseURL(.*?)>(.*?)</baseURL>", 2),
    "oaister": ("OAI base:(.*)</p>", 1),
}
OPENAIRE_LINK = ('<a class="dataprovider" href="(.*?)">', 1)
OPENAIRE_PAGE = ("<dt>OAI-PMH</dt><dd>(.*?)</dd>", 1)

FILES = {
    "opendoar": "opendoar.xml",
    "roar": "roar.xml",
    "openarchives": "openarchives.xml",
    "illinois": "illinois.xml",
    "oaister": "oaister.html",
    "openaire": "openaire/index.html",
}

# None marks a listed item without an OAI-PMH base URL.
Items = Sequence["str | None"]


def opendoar_doc(items: Items) -> str:
    out = ['<?xml version="1.0" encoding="UTF-8"?>', "<OpenDOAR>", "<repositories>"]
    for i, u in enumerate(items, 1):
        out.append(f'<repository rID="{i}"><rName>Repository {i}</rName>'
                   f"<rOaiBaseUrl>{escape(u or '')}</rOaiBaseUrl></repository>")
    out += ["</repositories>", "</OpenDOAR>", ""]
    return "\n".join(out)


def roar_doc(items: Items) -> str:
    out = ['<?xml version="1.0" encoding="utf-8"?>', "<eprints>"]
    for i, u in enumerate(items, 1):
        out.append(f"<eprint><eprintid>{i}</eprintid><oai_pmh>{escape(u or '')}</oai_pmh></eprint>")
    out += ["</eprints>", ""]
    return "\n".join(out)


def openarchives_doc(items: Items) -> str:
    out = ['<?xml version="1.0" encoding="UTF-8"?>', "<BaseURLs>"]
    for i, u in enumerate(items, 1):
        if u is None:
            continue
        out.append(f'<baseURL id="repo{i}" compression="deflate">{escape(u)}</baseURL>')
    out += ["</BaseURLs>", ""]
    return "\n".join(out)


def illinois_doc(items: Items) -> str:
    out = ['<?xml version="1.0"?>', "<Repositories>"]
    for i, u in enumerate(items, 1):
        if u is None:
            continue
        out.append(f"<Repository><repositoryName>R{i}</repositoryName><baseURL>{escape(u)}</baseURL></Repository>")
    out += ["</Repositories>", ""]
    return "\n".join(out)


def oaister_doc(items: Items) -> str:
    out = ["<html><body>", "<h1>OAIster contributors</h1>"]
    for i, u in enumerate(items, 1):
        if u is None:
            continue
        out.append(f"<p>Contributor {i}</p>")
        out.append(f"<p>OAI base:{escape(u)}</p>")
    out += ["</body></html>", ""]
    return "\n".join(out)


def openaire_docs(items: Items) -> dict[str, str]:
    docs = {}
    index = ["<html><body><ul>"]
    for i, u in enumerate(items, 1):
        name = f"dp-{i:04d}.html"
        index.append(f'<li><a class="dataprovider" href="{name}">Provider {i}</a></li>')
        body = f"<html><body><h1>Provider {i}</h1><dl>"
        if u is not None:
            body += f"<dt>OAI-PMH</dt><dd>{escape(u)}</dd>"
        docs[f"openaire/{name}"] = body + "</dl></body></html>\n"
    index.append("</ul></body></html>\n")
    docs["openaire/index.html"] = "\n".join(index)
    return docs


WRITERS = {
    "opendoar": opendoar_doc,
    "roar": roar_doc,
    "openarchives": openarchives_doc,
    "illinois": illinois_doc,
    "oaister": oaister_doc,
}


def manifest_doc(catalogs: Sequence[str]) -> list[dict]:
    out = []
    for c in catalogs:
        if c == "openaire":
            steps = [
                {"kind": "LinkFollow", "fetch_url": f"file:{FILES[c]}",
                 "pattern": OPENAIRE_LINK[0], "capture_group": OPENAIRE_LINK[1]},
                {"kind": "PatternExtract", "fetch_url": "file:openaire/",
                 "pattern": OPENAIRE_PAGE[0], "capture_group": OPENAIRE_PAGE[1]},
            ]
        else:
            pat, g = PATTERNS[c]
            steps = [{"kind": "PatternExtract", "fetch_url": f"file:{FILES[c]}", "pattern": pat, "capture_group": g}]
        out.append({"id": c, "display_name": DISPLAY[c], "steps": steps})
    return out


def identify_xml(base_url: str, name: str) -> str:
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        '<OAI-PMH xmlns="http://www.openarchives.org/OAI/2.0/" '
        'xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance" '
        'xsi:schemaLocation="http://www.openarchives.org/OAI/2.0/ '
        'http://www.openarchives.org/OAI/2.0/OAI-PMH.xsd">\n'
        "  <responseDate>2017-01-15T10:00:00Z</responseDate>\n"
        f'  <request verb="Identify">{escape(base_url)}</request>\n'
        "  <Identify>\n"
        f"    <repositoryName>{escape(name)}</repositoryName>\n"
        f"    <baseURL>{escape(base_url)}</baseURL>\n"
        "    <protocolVersion>2.0</protocolVersion>\n"
        "    <adminEmail>admin@example.org</adminEmail>\n"
        "    <earliestDatestamp>2005-01-01</earliestDatestamp>\n"
        "    <deletedRecord>no</deletedRecord>\n"
        "    <granularity>YYYY-MM-DD</granularity>\n"
        "  </Identify>\n"
        "</OAI-PMH>\n"
    )


def write_corpus(root: Path, listings: Mapping[str, Items], responses: Mapping[str, object]) -> Path:
    """Write listings, manifest and responses under ``root``; returns the manifest path."""
    root.mkdir(parents=True, exist_ok=True)
    for cat, items in listings.items():
        if cat == "openaire":
            for rel, text in openaire_docs(items).items():
                (root / rel).parent.mkdir(parents=True, exist_ok=True)
                (root / rel).write_text(text, encoding="utf-8")
        else:
            (root / FILES[cat]).write_text(WRITERS[cat](items), encoding="utf-8")
    manifest = root / "manifest.yaml"
    manifest.write_text(yaml.safe_dump(manifest_doc(list(listings)), sort_keys=False), encoding="utf-8")
    (root / "responses.yaml").write_text(yaml.dump(dict(responses), Dumper=DUMPER, sort_keys=True), encoding="utf-8")
    return manifest


# Each catalog spells the same repository differently; all collapse to one key.
SHARED_FORMS = {
    "opendoar": "http://{}",
    "roar": "https://{}/",
    "openarchives": "http://www.{}",
    "illinois": "http://{}?verb=ListRecords&metadataPrefix=oai_dc",
    "oaister": "https://www.{}/",
    "openaire": "http://{}/",
}


def shared_listings() -> dict[str, list[str]]:
    return {c: [SHARED_FORMS[c].format(u) for u in SHARED] for c in CATALOGS}


def shared_corpus(root: Path) -> Path:
    """Six catalogs, each listing exactly the 47 shared repositories, all reachable."""
    listings = shared_listings()
    responses = {}
    for urls in listings.values():
        for u in urls:
            base = u.split("?")[0]
            responses[f"{base}?verb=Identify"] = {"status": 200, "body": identify_xml(base, base)}
    return write_corpus(root, listings, responses)
