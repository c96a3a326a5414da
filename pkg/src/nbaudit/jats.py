"""Mining of scholarly full-text XML: article metadata and repository links.

Articles arrive as JATS-layout XML, either fetched from the literature
service or read from a directory.  Parsing maps the front matter onto
:class:`ArticleRecord`; link extraction walks every text node and attribute
value looking for repository mentions.
"""

from __future__ import annotations

import logging
import time
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

from .links import LinkExtraction, NormalizedRepoURL, find_candidates, normalize_github_link

logger = logging.getLogger(__name__)

DEFAULT_SEARCH_QUERY = "(ipynb OR jupyter OR ipython) AND github"

# Public-service etiquette: fixed delay between literature-API requests.
DEFAULT_REQUEST_DELAY_S = 0.35


class ArticleParseError(Exception):
    """Raised when an XML document cannot be turned into an ArticleRecord."""


@dataclass
class JournalRef:
    issn: str | None = None
    title: str | None = None
    abbreviations: list[str] = field(default_factory=list)


@dataclass
class AuthorRef:
    given: str | None = None
    family: str | None = None
    orcid: str | None = None
    email: str | None = None


@dataclass
class ArticleRecord:
    pmcid: str
    pmid: str | None = None
    doi: str | None = None
    title: str | None = None
    journal: JournalRef = field(default_factory=JournalRef)
    received: str | None = None
    accepted: str | None = None
    published: str | None = None
    license: str | None = None
    copyright: str | None = None
    keywords: list[str] = field(default_factory=list)
    subject_tags: list[str] = field(default_factory=list)
    mesh_top_terms: list[str] = field(default_factory=list)
    authors: list[AuthorRef] = field(default_factory=list)
    repo_links: list[NormalizedRepoURL] = field(default_factory=list)


def build_search_query(override: str | None = None) -> str:
    """Return the literature search query; a config override wins verbatim."""
    if override is not None:
        if not override.strip():
            raise ValueError("search query override must be nonempty")
        return override
    return DEFAULT_SEARCH_QUERY


class SearchServiceError(Exception):
    """Network or protocol failure talking to the literature search service."""

    def __init__(self, message: str, attempts: int = 1, payload: str | None = None):
        super().__init__(message)
        self.attempts = attempts
        self.payload = payload


def fetch_article_ids(
    query: str,
    search_client,
    page_size: int = 100,
    delay_s: float = DEFAULT_REQUEST_DELAY_S,
    retries: int = 3,
) -> list[str]:
    """Page through the search service and return de-duplicated ids in order.

    ``search_client.search(query, retstart, retmax)`` must return
    ``(ids, total)``.
    """
    if not query.strip():
        raise ValueError("query must be nonempty")
    seen: set[str] = set()
    ordered: list[str] = []
    retstart = 0
    total = None
    while total is None or retstart < total:
        ids, total = _search_with_retry(search_client, query, retstart, page_size, retries)
        for pmcid in ids:
            if pmcid not in seen:
                seen.add(pmcid)
                ordered.append(pmcid)
        retstart += page_size
        if total is None or retstart >= total:
            break
        if delay_s:
            time.sleep(delay_s)
    return ordered


def _search_with_retry(client, query, retstart, retmax, retries):
    last = None
    for attempt in range(1, retries + 1):
        try:
            return client.search(query, retstart=retstart, retmax=retmax)
        except SearchServiceError:
            raise
        except Exception as exc:  # transport-level failure
            last = exc
            logger.warning("search attempt %d/%d failed: %s", attempt, retries, exc)
    raise SearchServiceError(f"search failed after {retries} attempts: {last}", attempts=retries)


def _text(elem) -> str | None:
    if elem is None:
        return None
    value = "".join(elem.itertext()).strip()
    return value or None


def _date_of(elem) -> str | None:
    if elem is None:
        return None
    year = _text(elem.find("year"))
    if year is None:
        return None
    month = _text(elem.find("month")) or "1"
    day = _text(elem.find("day")) or "1"
    return f"{int(year):04d}-{int(month):02d}-{int(day):02d}"


def parse_article(source: str | Path) -> ArticleRecord:
    """Parse one JATS document (path or XML string) into an ArticleRecord.

    Absent optional fields stay ``None``/empty, never empty-string sentinels.
    """
    if isinstance(source, Path):
        text = source.read_text(encoding="utf-8")
    else:
        text = source
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        line, column = getattr(exc, "position", (1, 0))
        prior = sum(len(ln) + 1 for ln in text.splitlines()[: line - 1])
        offset = len(text[: prior + column].encode("utf-8"))
        raise ArticleParseError(f"malformed XML at byte {offset}: {exc}") from exc

    front = root.find("front")
    if front is None:
        raise ArticleParseError("no <front> element")
    journal_meta = front.find("journal-meta")
    article_meta = front.find("article-meta")
    if article_meta is None:
        raise ArticleParseError("no <article-meta> element")

    pmcid = pmid = doi = None
    for aid in article_meta.findall("article-id"):
        kind = aid.get("pub-id-type")
        if kind == "pmc":
            pmcid = _text(aid)
        elif kind == "pmid":
            pmid = _text(aid)
        elif kind == "doi":
            doi = _text(aid)
    if not pmcid:
        raise ArticleParseError("article has no PMC id")

    journal = JournalRef()
    if journal_meta is not None:
        journal.issn = _text(journal_meta.find("issn"))
        journal.title = _text(journal_meta.find("journal-title-group/journal-title")) or _text(
            journal_meta.find("journal-title")
        )
        journal.abbreviations = [
            t for jid in journal_meta.findall("journal-id")
            if jid.get("journal-id-type") in ("nlm-ta", "iso-abbrev") and (t := _text(jid))
        ]

    record = ArticleRecord(pmcid=pmcid, pmid=pmid, doi=doi, journal=journal)
    record.title = _text(article_meta.find("title-group/article-title"))

    for hdate in article_meta.findall("history/date"):
        kind = hdate.get("date-type")
        if kind in ("received", "accepted"):
            setattr(record, kind, _date_of(hdate))
    pub_dates = article_meta.findall("pub-date")
    if pub_dates:
        # Earliest pub-date wins; electronic publication usually precedes print.
        parsed = [d for d in (_date_of(p) for p in pub_dates) if d]
        record.published = min(parsed) if parsed else None

    record.license = _text(article_meta.find("permissions/license"))
    record.copyright = _text(article_meta.find("permissions/copyright-statement"))

    for group in article_meta.findall("kwd-group"):
        terms = [t for k in group.findall("kwd") if (t := _text(k))]
        if group.get("kwd-group-type") == "mesh":
            record.mesh_top_terms.extend(terms)
        else:
            record.keywords.extend(terms)
    record.subject_tags = [
        t for s in article_meta.findall(".//article-categories//subject") if (t := _text(s))
    ]

    for contrib in article_meta.findall(".//contrib[@contrib-type='author']"):
        author = AuthorRef(
            given=_text(contrib.find("name/given-names")),
            family=_text(contrib.find("name/surname")),
            email=_text(contrib.find("email")),
        )
        for cid in contrib.findall("contrib-id"):
            if cid.get("contrib-id-type") == "orcid":
                author.orcid = (_text(cid) or "").rsplit("/", 1)[-1] or None
        record.authors.append(author)

    record.repo_links = [
        e.normalized for e in extract_github_links(root) if e.disposition == "normalized"
    ]
    return record


def extract_github_links(document: ET.Element | str) -> list[LinkExtraction]:
    """Scan a parsed document for repository link candidates.

    Text nodes and attribute values are both scanned; each distinct raw
    candidate appears exactly once, in order of first appearance, and
    candidates that normalize to the same repository collapse to the first.
    """
    if isinstance(document, str):
        document = ET.fromstring(document)
    raws: list[str] = []
    seen_raw: set[str] = set()
    for elem in document.iter():
        chunks = [elem.text or "", elem.tail or ""]
        chunks.extend(elem.attrib.values())
        for chunk in chunks:
            for raw in find_candidates(chunk):
                if raw not in seen_raw:
                    seen_raw.add(raw)
                    raws.append(raw)

    results: list[LinkExtraction] = []
    seen_canonical: set[str] = set()
    for raw in raws:
        extraction = normalize_github_link(raw)
        if extraction.disposition == "normalized":
            canonical = extraction.normalized.canonical
            if canonical in seen_canonical:
                continue
            seen_canonical.add(canonical)
        results.append(extraction)
    return results


def load_articles_from_directory(directory: Path) -> tuple[list[ArticleRecord], list[tuple[Path, str]]]:
    """Parse every ``*.xml`` file in a directory; failures are collected, not fatal."""
    records, failures = [], []
    for path in sorted(directory.glob("*.xml")):
        try:
            records.append(parse_article(path))
        except ArticleParseError as exc:
            logger.warning("skipping %s: %s", path.name, exc)
            failures.append((path, str(exc)))
    return records, failures
