"""Link candidate scanning and normalization."""

import string

import pytest
from hypothesis import given, settings, strategies as st

from nbaudit.links import (
    LinkExtraction,
    NormalizedRepoURL,
    find_candidates,
    normalize_github_link,
)

CANONICAL = "https://github.com/owner/repo"


@pytest.mark.parametrize("raw", [
    "https://github.com/owner/repo",
    "http://github.com/owner/repo",
    "github.com/owner/repo",
    "www.github.com/owner/repo",
    "https://www.github.com/owner/repo",
    "https://github.com/owner/repo/",
    "https://github.com/owner/repo.git",
    "https://github.com/owner/repo/tree/main/notebooks",
    "https://github.com/owner/repo/blob/master/a.ipynb",
    "https://github.com/owner/repo#readme",
    "https://github.com/owner/repo?tab=repositories",
    "https://GITHUB.COM/owner/repo",
])
def test_normalized_variants(raw):
    extraction = normalize_github_link(raw)
    assert extraction.disposition == "normalized"
    assert extraction.normalized.canonical == CANONICAL


def test_owner_repo_case_preserved():
    extraction = normalize_github_link("https://github.com/OwnEr/RePo")
    assert extraction.normalized.canonical == "https://github.com/OwnEr/RePo"


@pytest.mark.parametrize("raw", [
    "https://nbviewer.org/github/owner/repo/blob/main/x.ipynb",
    "https://nbviewer.jupyter.org/github/owner/repo/tree/main",
    "nbviewer.ipython.org/github/owner/repo",
])
def test_nbviewer_extraction(raw):
    extraction = normalize_github_link(raw)
    assert extraction.disposition == "normalized"
    assert extraction.normalized.canonical == CANONICAL


def test_nbviewer_without_repo_is_malformed():
    assert normalize_github_link("https://nbviewer.org/gist/someone/abc").disposition == "malformed"


@pytest.mark.parametrize("raw", [
    "https://github.com/owner",
    "github.com/owner/",
    "https://github.com/owner/.git",
])
def test_user_only_excluded(raw):
    assert normalize_github_link(raw).disposition == "excluded_user_only"


@pytest.mark.parametrize("raw", [
    "https://owner.github.io",
    "https://owner.github.io/project",
    "github.io/whatever",
])
def test_pages_excluded(raw):
    assert normalize_github_link(raw).disposition == "excluded_pages"


@pytest.mark.parametrize("raw", [
    "",
    "   ",
    "https://gitlab.com/owner/repo",
    "https://github.com/ow~ner/repo",
    "https://github.com/owner/re po",
    "https://github.com/",
])
def test_malformed(raw):
    assert normalize_github_link(raw).disposition == "malformed"


def test_payload_accompanies_normalized_only():
    with pytest.raises(ValueError):
        LinkExtraction("x", "malformed", NormalizedRepoURL("github.com", "a", "b"))
    with pytest.raises(ValueError):
        LinkExtraction("x", "normalized", None)


def test_idempotence_on_curated_cases():
    for raw in ("github.com/a/b.git", "https://www.github.com/a/b/tree/x"):
        first = normalize_github_link(raw)
        again = normalize_github_link(first.normalized.canonical)
        assert again.normalized == first.normalized


_segment = st.text(alphabet=string.ascii_letters + string.digits + "._-~$%", min_size=0, max_size=12)


@settings(max_examples=300, deadline=None)
@given(
    st.sampled_from(["", "http://", "https://"]),
    st.sampled_from(["github.com", "www.github.com", "gitlab.com", "a.github.io",
                     "nbviewer.org", "github.io"]),
    st.lists(_segment, min_size=0, max_size=4),
)
def test_properties_totality_and_idempotence(scheme, host, segments):
    raw = scheme + "/".join([host] + segments)
    extraction = normalize_github_link(raw)
    # totality: exactly one disposition from the closed set
    assert extraction.disposition in (
        "normalized", "excluded_user_only", "excluded_pages", "malformed")
    if extraction.disposition == "normalized":
        again = normalize_github_link(extraction.normalized.canonical)
        assert again.disposition == "normalized"
        assert again.normalized == extraction.normalized


def test_find_candidates_order_and_punctuation():
    text = ("See https://github.com/a/b, then github.com/c/d. "
            "Pages: https://x.github.io/site; profile (https://github.com/e).")
    assert find_candidates(text) == [
        "https://github.com/a/b",
        "github.com/c/d",
        "https://x.github.io/site",
        "https://github.com/e",
    ]


def test_find_candidates_ignores_other_hosts():
    assert find_candidates("https://gitlab.com/a/b and example.com/x") == []
