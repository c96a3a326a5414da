"""Article XML parsing, link mining and the search front door."""

import pytest

from nbaudit.jats import (
    ArticleParseError,
    DEFAULT_SEARCH_QUERY,
    SearchServiceError,
    build_search_query,
    extract_github_links,
    fetch_article_ids,
    load_articles_from_directory,
    parse_article,
)

ARTICLE = """<article>
 <front>
  <journal-meta>
   <journal-id journal-id-type="nlm-ta">J Ex</journal-id>
   <issn>1111-2222</issn>
   <journal-title-group><journal-title>Journal of Examples</journal-title></journal-title-group>
  </journal-meta>
  <article-meta>
   <article-id pub-id-type="pmc">PMC42</article-id>
   <article-id pub-id-type="pmid">99</article-id>
   <article-id pub-id-type="doi">10.1/x</article-id>
   <title-group><article-title>A Title</article-title></title-group>
   <article-categories><subj-group><subject>Research Article</subject></subj-group></article-categories>
   <contrib-group>
    <contrib contrib-type="author">
     <contrib-id contrib-id-type="orcid">https://orcid.org/0000-0001-2345-6789</contrib-id>
     <name><surname>Doe</surname><given-names>Jo</given-names></name>
     <email>jo@example.org</email>
    </contrib>
   </contrib-group>
   <history>
    <date date-type="received"><day>2</day><month>1</month><year>2020</year></date>
    <date date-type="accepted"><day>5</day><month>2</month><year>2020</year></date>
   </history>
   <pub-date pub-type="ppub"><day>1</day><month>6</month><year>2020</year></pub-date>
   <pub-date pub-type="epub"><day>20</day><month>2</month><year>2020</year></pub-date>
   <kwd-group><kwd>notebooks</kwd></kwd-group>
   <kwd-group kwd-group-type="mesh"><kwd>Genomics</kwd><kwd>Software</kwd></kwd-group>
   <permissions>
    <copyright-statement>(c) Authors 2020</copyright-statement>
    <license>CC BY 4.0</license>
   </permissions>
  </article-meta>
 </front>
 <body>
  <p>Code: <ext-link xlink:href="https://github.com/jo/code" xmlns:xlink="http://www.w3.org/1999/xlink">https://github.com/jo/code</ext-link>
     and https://github.com/jo/code.git plus https://github.com/jo.</p>
 </body>
</article>
"""


def test_default_query_and_override():
    assert build_search_query() == "(ipynb OR jupyter OR ipython) AND github"
    assert DEFAULT_SEARCH_QUERY == "(ipynb OR jupyter OR ipython) AND github"
    assert build_search_query("custom") == "custom"
    with pytest.raises(ValueError):
        build_search_query("   ")


def test_parse_article_fields():
    record = parse_article(ARTICLE)
    assert record.pmcid == "PMC42"
    assert record.pmid == "99"
    assert record.doi == "10.1/x"
    assert record.title == "A Title"
    assert record.journal.title == "Journal of Examples"
    assert record.journal.issn == "1111-2222"
    assert record.received == "2020-01-02"
    assert record.accepted == "2020-02-05"
    # earliest pub date wins
    assert record.published == "2020-02-20"
    assert record.license == "CC BY 4.0"
    assert record.copyright == "(c) Authors 2020"
    assert record.keywords == ["notebooks"]
    assert record.mesh_top_terms == ["Genomics", "Software"]
    assert record.subject_tags == ["Research Article"]
    assert len(record.authors) == 1
    author = record.authors[0]
    assert (author.given, author.family) == ("Jo", "Doe")
    assert author.orcid == "0000-0001-2345-6789"
    assert author.email == "jo@example.org"


def test_repo_links_deduplicated_by_canonical():
    record = parse_article(ARTICLE)
    assert [u.canonical for u in record.repo_links] == ["https://github.com/jo/code"]


def test_extract_scans_attributes_and_text():
    doc = ('<article><front><p href="https://github.com/a/b">'
           'see github.com/c/d</p></front></article>')
    extractions = extract_github_links(doc)
    raws = [e.raw for e in extractions]
    assert "https://github.com/a/b" in raws
    assert "github.com/c/d" in raws


def test_extract_keeps_first_appearance_order():
    doc = ("<a><p>github.com/z/one then github.com/a/two and "
           "https://github.com/z/one.git</p></a>")
    extractions = extract_github_links(doc)
    assert [e.normalized.repo for e in extractions if e.normalized] == ["one", "two"]


def test_malformed_xml_reports_byte_offset():
    bad = "<article>\n  <front>& oops</front>\n</article>"
    with pytest.raises(ArticleParseError) as err:
        parse_article(bad)
    assert "byte" in str(err.value)


def test_missing_pmc_id_rejected():
    with pytest.raises(ArticleParseError):
        parse_article("<article><front><article-meta/></front></article>")


def test_load_directory_collects_failures(tmp_path):
    (tmp_path / "good.xml").write_text(ARTICLE)
    (tmp_path / "bad.xml").write_text("<broken")
    records, failures = load_articles_from_directory(tmp_path)
    assert [r.pmcid for r in records] == ["PMC42"]
    assert len(failures) == 1 and failures[0][0].name == "bad.xml"


class PagedClient:
    def __init__(self, pages):
        self.pages = pages
        self.calls = 0

    def search(self, query, retstart, retmax):
        self.calls += 1
        total = sum(len(p) for p in self.pages)
        page = self.pages[retstart // retmax] if retstart // retmax < len(self.pages) else []
        return page, total


def test_fetch_ids_pages_and_deduplicates():
    client = PagedClient([["1", "2"], ["2", "3"]])
    ids = fetch_article_ids("q", client, page_size=2, delay_s=0)
    assert ids == ["1", "2", "3"]
    assert client.calls == 2


def test_fetch_ids_rejects_empty_query():
    with pytest.raises(ValueError):
        fetch_article_ids("  ", PagedClient([[]]), delay_s=0)


class FailingClient:
    def __init__(self):
        self.calls = 0

    def search(self, query, retstart, retmax):
        self.calls += 1
        raise ConnectionError("nope")


def test_fetch_ids_exhausts_retries():
    client = FailingClient()
    with pytest.raises(SearchServiceError) as err:
        fetch_article_ids("q", client, retries=3, delay_s=0)
    assert err.value.attempts == 3
    assert client.calls == 3
