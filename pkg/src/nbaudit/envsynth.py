"""Dependency discovery and execution-environment synthesis.

Declared dependencies are read from requirement files, a root setup file
(pattern-matched, never executed) and a root Pipfile.  Each Python notebook
gets an :class:`EnvironmentPlan`; repositories without any declaration fall
back to a broad "kitchen sink" package manifest.  Provisioning goes through
an external manager adapter honoring the command contract

    <manager> create --name <id> python=<ver>
    <manager> install --name <id> <pkg-spec>...

with exit 0 meaning success.  Environments are cached by their content key.
"""

from __future__ import annotations

import hashlib
import logging
import re
import shlex
import subprocess
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

logger = logging.getLogger(__name__)

DEFAULT_INTERPRETER_VERSION = "3.7"
DEFAULT_PROVISION_TIMEOUT_S = 20 * 60

_REQUIREMENT_LINE_RE = re.compile(r"^\s*([A-Za-z0-9][A-Za-z0-9._-]*)\s*(.*?)\s*$")
_INSTALL_REQUIRES_RE = re.compile(r"install_requires\s*=\s*\[(.*?)\]", re.DOTALL)
_STRING_LITERAL_RE = re.compile(r"""["']([^"']+)["']""")


@dataclass
class DependencySpec:
    repo_id: str
    source_kind: str  # requirements_file | setup_file | pipfile
    path: str
    entries: list[tuple[str, str | None]] = field(default_factory=list)
    unparsed: bool = False


@dataclass
class EnvironmentPlan:
    notebook_id: str
    interpreter_version: str
    packages: list[tuple[str, str | None]]
    fallback_kitchen_sink: bool
    version_defaulted: bool
    manager_command: str

    @property
    def cache_key(self) -> str:
        specs = sorted(f"{name}{constraint or ''}" for name, constraint in self.packages)
        digest = hashlib.sha256("|".join([self.interpreter_version] + specs).encode()).hexdigest()
        return f"env-{self.interpreter_version}-{digest[:12]}"


@dataclass
class ProvisionResult:
    plan_id: str
    status: str  # ready | install_failed
    env_handle: str | None = None
    log_excerpt: str = ""
    wall_time: float = 0.0
    cached: bool = False


class ManagerMissing(Exception):
    """The manager executable is absent: a configuration error, not data."""


def default_kitchen_sink() -> list[tuple[str, str | None]]:
    text = resources.files("nbaudit").joinpath("data/kitchen_sink.txt").read_text()
    return [(line.strip(), None) for line in text.splitlines() if line.strip()]


def _parse_requirement_line(line: str) -> tuple[str, str | None] | None:
    line = line.split("#", 1)[0].strip()
    if not line or line.startswith(("-", "--")):
        return None
    m = _REQUIREMENT_LINE_RE.match(line)
    if not m:
        return None
    name, constraint = m.group(1), m.group(2) or None
    return name, constraint


def _parse_requirements(path: Path, repo_id: str, rel: str) -> DependencySpec:
    spec = DependencySpec(repo_id, "requirements_file", rel)
    try:
        lines = path.read_text(encoding="utf-8", errors="replace").splitlines()
    except OSError:
        spec.unparsed = True
        return spec
    for line in lines:
        entry = _parse_requirement_line(line)
        if entry:
            spec.entries.append(entry)
    return spec


def _parse_setup(path: Path, repo_id: str, rel: str) -> DependencySpec:
    """Extract install_requires by pattern matching the list literal; the
    setup script is never executed."""
    spec = DependencySpec(repo_id, "setup_file", rel)
    try:
        text = path.read_text(encoding="utf-8", errors="replace")
    except OSError:
        spec.unparsed = True
        return spec
    m = _INSTALL_REQUIRES_RE.search(text)
    if not m:
        spec.unparsed = True
        return spec
    for literal in _STRING_LITERAL_RE.findall(m.group(1)):
        entry = _parse_requirement_line(literal)
        if entry:
            spec.entries.append(entry)
    return spec


def _parse_pipfile(path: Path, repo_id: str, rel: str) -> DependencySpec:
    spec = DependencySpec(repo_id, "pipfile", rel)
    try:
        lines = path.read_text(encoding="utf-8", errors="replace").splitlines()
    except OSError:
        spec.unparsed = True
        return spec
    in_packages = False
    for line in lines:
        stripped = line.strip()
        if stripped.startswith("["):
            in_packages = stripped == "[packages]"
            continue
        if not in_packages or not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            continue
        name, _, version = stripped.partition("=")
        name = name.strip().strip('"')
        version = version.strip().strip('"')
        constraint = None if version in ("*", "") else version
        if re.fullmatch(r"[A-Za-z0-9._-]+", name):
            spec.entries.append((name, constraint))
    return spec


def discover_dependency_files(repo_root: Path, repo_id: str = "") -> list[DependencySpec]:
    """requirements*.txt at any depth; setup.py and Pipfile at the root only."""
    specs: list[DependencySpec] = []
    for path in sorted(repo_root.rglob("requirements*.txt")):
        if ".ipynb_checkpoints" in path.parts:
            continue
        specs.append(_parse_requirements(path, repo_id, path.relative_to(repo_root).as_posix()))
    setup = repo_root / "setup.py"
    if setup.exists():
        specs.append(_parse_setup(setup, repo_id, "setup.py"))
    for candidate in ("Pipfile", "pipfile"):
        pipfile = repo_root / candidate
        if pipfile.exists():
            specs.append(_parse_pipfile(pipfile, repo_id, candidate))
            break
    return specs


def build_plan(
    notebook_language: str,
    notebook_version: str | None,
    notebook_id: str,
    specs: list[DependencySpec],
    manager_command: str = "conda",
    default_version: str = DEFAULT_INTERPRETER_VERSION,
    kitchen_sink: list[tuple[str, str | None]] | None = None,
) -> EnvironmentPlan:
    """Merge repo dependency specs into a plan for one Python notebook.

    Later files override earlier ones on a package-name clash.
    """
    if notebook_language != "python":
        raise ValueError(f"only python notebooks are planned, got {notebook_language!r}")
    version_defaulted = notebook_version is None
    version = notebook_version or default_version

    merged: dict[str, tuple[str, str | None]] = {}
    for spec in specs:
        for name, constraint in spec.entries:
            merged[name.lower()] = (name, constraint)
    fallback = not specs
    if fallback:
        packages = list(kitchen_sink if kitchen_sink is not None else default_kitchen_sink())
    else:
        packages = list(merged.values())
    return EnvironmentPlan(
        notebook_id=notebook_id,
        interpreter_version=version,
        packages=packages,
        fallback_kitchen_sink=fallback,
        version_defaulted=version_defaulted,
        manager_command=manager_command,
    )


class Provisioner:
    """Creates and caches environments through the manager adapter."""

    def __init__(self, manager_command: str, env_root: Path | None = None,
                 timeout_s: float = DEFAULT_PROVISION_TIMEOUT_S):
        self.manager_command = manager_command
        self.env_root = env_root
        self.timeout_s = timeout_s
        self._cache: dict[str, ProvisionResult] = {}

    def _run(self, args: list[str]) -> subprocess.CompletedProcess:
        cmd = shlex.split(self.manager_command) + args
        try:
            return subprocess.run(cmd, capture_output=True, text=True, timeout=self.timeout_s)
        except FileNotFoundError as exc:
            raise ManagerMissing(f"manager executable not found: {cmd[0]}") from exc

    def provision(self, plan: EnvironmentPlan) -> ProvisionResult:
        key = plan.cache_key
        if key in self._cache:
            cached = self._cache[key]
            return ProvisionResult(plan.notebook_id, cached.status, cached.env_handle,
                                   cached.log_excerpt, wall_time=0.0, cached=True)
        started = time.monotonic()
        create = self._run(["create", "--name", key, f"python={plan.interpreter_version}"])
        if create.returncode != 0:
            result = self._failure(plan, key, create, started)
        else:
            pkg_specs = [f"{name}{constraint}" if constraint else name for name, constraint in plan.packages]
            if pkg_specs:
                install = self._run(["install", "--name", key] + pkg_specs)
            else:
                install = create
            if install.returncode != 0:
                result = self._failure(plan, key, install, started)
            else:
                result = ProvisionResult(plan.notebook_id, "ready", env_handle=key,
                                         wall_time=time.monotonic() - started)
        self._cache[key] = result
        return result

    def _failure(self, plan, key, proc, started) -> ProvisionResult:
        log = (proc.stdout + "\n" + proc.stderr).strip() or f"exit {proc.returncode}"
        excerpt = "\n".join(log.splitlines()[-50:])
        return ProvisionResult(plan.notebook_id, "install_failed", log_excerpt=excerpt,
                               wall_time=time.monotonic() - started)
