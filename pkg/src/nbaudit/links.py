"""Normalization of repository links found in article full texts.

Raw mentions of the code-hosting service come in many shapes: with or
without a scheme, with "www.", with branch/path suffixes, wrapped in
notebook-viewer URLs, or pointing only at a user profile or a Pages site.
Every candidate is resolved to exactly one disposition.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from urllib.parse import urlsplit

HOST = "github.com"
PAGES_HOST = "github.io"
NBVIEWER_HOSTS = {"nbviewer.org", "nbviewer.jupyter.org", "nbviewer.ipython.org"}

# Hosting-service naming rules: ASCII letters, digits, dot, underscore, hyphen.
_NAME_RE = re.compile(r"^[A-Za-z0-9._-]+$")


@dataclass(frozen=True)
class NormalizedRepoURL:
    host: str
    owner: str
    repo: str

    @property
    def canonical(self) -> str:
        return f"https://{self.host}/{self.owner}/{self.repo}"


@dataclass(frozen=True)
class LinkExtraction:
    """A raw candidate link together with its single disposition."""

    raw: str
    disposition: str  # "normalized" | "excluded_user_only" | "excluded_pages" | "malformed"
    normalized: NormalizedRepoURL | None = None

    def __post_init__(self):
        if (self.disposition == "normalized") != (self.normalized is not None):
            raise ValueError("normalized payload must accompany exactly the normalized disposition")


def _split_host_path(raw: str) -> tuple[str, str] | None:
    """Return (lowercased host, path) for a raw candidate, or None."""
    text = raw.strip()
    if not text:
        return None
    if "://" not in text:
        text = "https://" + text
    try:
        parts = urlsplit(text)
    except ValueError:
        return None
    host = parts.hostname
    if host is None:
        return None
    host = host.lower()
    if host.startswith("www."):
        host = host[4:]
    return host, parts.path


def normalize_github_link(raw: str) -> LinkExtraction:
    """Resolve one raw link mention to a disposition.

    Idempotent: feeding a canonical URL back in yields the same result.
    """
    split = _split_host_path(raw)
    if split is None:
        return LinkExtraction(raw, "malformed")
    host, path = split

    if host == PAGES_HOST or host.endswith("." + PAGES_HOST):
        return LinkExtraction(raw, "excluded_pages")

    segments = [s for s in path.split("/") if s]

    if host in NBVIEWER_HOSTS:
        # Viewer URLs embed the repository as /github/{owner}/{repo}/...
        if len(segments) >= 3 and segments[0].lower() == "github":
            segments = segments[1:3]
            host = HOST
        else:
            return LinkExtraction(raw, "malformed")
    elif host != HOST:
        return LinkExtraction(raw, "malformed")

    if not segments:
        return LinkExtraction(raw, "malformed")
    if len(segments) == 1:
        if _NAME_RE.match(segments[0]):
            return LinkExtraction(raw, "excluded_user_only")
        return LinkExtraction(raw, "malformed")

    # Anything beyond owner/repo (tree/blob/commit/... or arbitrary paths)
    # is a suffix we strip.
    owner, repo = segments[0], segments[1]
    if repo.endswith(".git"):
        repo = repo[: -len(".git")]
    if not repo:
        return LinkExtraction(raw, "excluded_user_only")
    if not _NAME_RE.match(owner) or not _NAME_RE.match(repo):
        return LinkExtraction(raw, "malformed")
    url = NormalizedRepoURL(HOST, owner, repo)
    return LinkExtraction(raw, "normalized", url)


# Candidate URLs in prose frequently drag along trailing punctuation.
_TRAILING_PUNCT = ".,;:)]}>'\"!?"

_CANDIDATE_RE = re.compile(
    r"(?:https?://)?(?:[A-Za-z0-9-]+\.)*"
    r"(?:github\.com|github\.io|nbviewer\.org|nbviewer\.jupyter\.org|nbviewer\.ipython\.org)"
    r"(?:/[^\s<>\"')\]},;]*)?",
    re.IGNORECASE,
)


def find_candidates(text: str) -> list[str]:
    """Scan free text for host-bearing URL candidates, in order of appearance."""
    found = []
    for match in _CANDIDATE_RE.finditer(text):
        raw = match.group(0).rstrip(_TRAILING_PUNCT)
        if raw:
            found.append(raw)
    return found
