"""Resolving normalized repository URLs to clones plus hosting metadata.

The hosting service is reached through an injectable ``RepoHost`` object so
that tests and offline runs can swap in fixture-backed implementations.  The
clone itself goes through an external version-control executable configured
as a command template.
"""

from __future__ import annotations

import logging
import shlex
import shutil
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path

from .links import NormalizedRepoURL

logger = logging.getLogger(__name__)

RETRYABLE_STATUSES = {429, 500, 502, 503, 504}

DEFAULT_CLONE_TEMPLATE = "git clone --depth 1 --single-branch {url} {dest}"


@dataclass
class RepositoryRecord:
    url: NormalizedRepoURL
    accessible: bool = False
    status: int | None = None
    redirected: bool = False
    clone_path: Path | None = None
    default_branch: str | None = None
    created: str | None = None
    updated: str | None = None
    pushed: str | None = None
    languages: dict[str, int] = field(default_factory=dict)
    subscribers: int = 0
    forks: int = 0
    open_issues: int = 0
    releases: int = 0
    license: str | None = None
    commits_after: dict[str, int] = field(default_factory=dict)
    article_ids: list[str] = field(default_factory=list)
    metadata_incomplete: bool = False


class HarvestError(Exception):
    pass


class AccessibilityUnknown(HarvestError):
    """Network exhaustion: the repository is excluded from funnel denominators."""


def check_accessibility(url: NormalizedRepoURL, host, retries: int = 3, delay_s: float = 0.0):
    """Probe the repository; transient statuses are retried before concluding.

    ``host.status(url)`` returns an HTTP status code (following redirects) or
    raises on transport failure.  Returns ``("accessible", status)`` or
    ``("gone", status)``.
    """
    last_exc = None
    for attempt in range(retries):
        try:
            status = host.status(url)
        except Exception as exc:
            last_exc = exc
            logger.warning("accessibility probe %s failed (%d/%d): %s", url.canonical, attempt + 1, retries, exc)
            if delay_s:
                time.sleep(delay_s)
            continue
        if status in RETRYABLE_STATUSES:
            if delay_s:
                time.sleep(delay_s)
            continue
        if 200 <= status < 300:
            return "accessible", status
        return "gone", status
    raise AccessibilityUnknown(f"{url.canonical}: probes exhausted ({last_exc})")


def clone_destination(url: NormalizedRepoURL, workspace: Path) -> Path:
    return workspace / f"{url.owner}__{url.repo}"


def clone_default_branch(
    url: NormalizedRepoURL,
    workspace: Path,
    clone_template: str = DEFAULT_CLONE_TEMPLATE,
    force: bool = False,
) -> Path:
    """Shallow-clone only the default branch into a deterministic destination.

    A destination collision is an error unless ``force`` is given; silent
    overwrites would make re-runs unauditable.
    """
    dest = clone_destination(url, workspace)
    if dest.exists():
        if not force:
            raise HarvestError(f"destination already exists: {dest}")
        shutil.rmtree(dest)
    workspace.mkdir(parents=True, exist_ok=True)
    cmd = [part.format(url=url.canonical, dest=str(dest)) for part in shlex.split(clone_template)]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        stderr = proc.stderr.strip()
        if "empty" in stderr.lower():
            raise HarvestError("empty repository")
        raise HarvestError(f"clone failed (exit {proc.returncode}): {stderr[-500:]}")
    if not dest.exists():
        raise HarvestError("empty repository")
    return dest


def fetch_repo_metadata(
    url: NormalizedRepoURL,
    api_client,
    article_dates: dict[str, str] | None = None,
    retries: int = 3,
    backoff_s: float = 0.0,
) -> RepositoryRecord:
    """Populate a RepositoryRecord from the hosting API.

    ``api_client.metadata(url)`` returns a payload dict; rate limiting is
    retried with backoff, after which a partial record is flagged
    ``metadata_incomplete``.
    """
    record = RepositoryRecord(url=url, accessible=True)
    payload = None
    for attempt in range(retries):
        try:
            payload = api_client.metadata(url)
            break
        except Exception as exc:
            logger.warning("metadata fetch %s (%d/%d): %s", url.canonical, attempt + 1, retries, exc)
            if backoff_s:
                time.sleep(backoff_s * (2**attempt))
    if payload is None:
        record.metadata_incomplete = True
        return record

    record.default_branch = payload.get("default_branch")
    record.created = payload.get("created_at")
    record.updated = payload.get("updated_at")
    record.pushed = payload.get("pushed_at")
    record.languages = dict(payload.get("languages", {}))
    record.subscribers = int(payload.get("subscribers_count", 0))
    record.forks = int(payload.get("forks_count", 0))
    record.open_issues = int(payload.get("open_issues_count", 0))
    record.releases = int(payload.get("releases_count", 0))
    lic = payload.get("license")
    record.license = lic.get("name") if isinstance(lic, dict) else lic
    record.redirected = bool(payload.get("redirected", False))

    commit_dates = payload.get("commit_dates")
    if commit_dates is not None and article_dates:
        for kind, when in article_dates.items():
            if when is None:
                continue
            record.commits_after[kind] = sum(1 for c in commit_dates if c[:10] > when[:10])
    return record


def find_notebooks(clone_path: Path) -> list[tuple[str, bool]]:
    """Recursively list notebook files as (relative posix path, readable).

    Checkpoint directories duplicate notebooks and are excluded.
    """
    results = []
    for path in sorted(clone_path.rglob("*.ipynb")):
        if ".ipynb_checkpoints" in path.parts:
            continue
        rel = path.relative_to(clone_path).as_posix()
        readable = True
        try:
            with open(path, "rb"):
                pass
        except OSError:
            readable = False
        results.append((rel, readable))
    return results
