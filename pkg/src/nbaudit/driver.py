"""Stage orchestration: mine, harvest, inventory, analyze, plan, provision,
execute, diff, report.

Every stage is idempotent: completed work is detected in the store and
skipped, so a rerun after a crash continues where the previous process
stopped and converges to the same result.  Stages consume only store rows
written by their predecessors, so they compose when run one at a time.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import time
from pathlib import Path

from . import envsynth, harness, harvest, imports as imports_mod, jats, style
from .config import PipelineConfig
from .diffing import compare
from .inventory import CellRecord, InvalidNotebook, parse_notebook
from .links import NormalizedRepoURL
from .store import CorpusStore

logger = logging.getLogger(__name__)

STAGES = ["mine", "harvest", "inventory", "analyze", "plan", "provision",
          "execute", "diff", "report"]


class DriverError(Exception):
    pass


class StageDependencyError(DriverError):
    """A stage was requested before its inputs exist in the store."""


class FixtureHost:
    """Hosting-service stand-in backed by a directory of working trees."""

    def __init__(self, root: Path):
        self.root = Path(root)

    def _dir(self, url: NormalizedRepoURL) -> Path:
        return self.root / f"{url.owner}__{url.repo}"

    def status(self, url: NormalizedRepoURL) -> int:
        return 200 if self._dir(url).exists() else 404

    def metadata(self, url: NormalizedRepoURL) -> dict:
        meta = self._dir(url) / ".meta.json"
        if meta.exists():
            return json.loads(meta.read_text(encoding="utf-8"))
        return {}


class LiveHost:
    """Hosting-service client over HTTP; the API token comes from config."""

    def __init__(self, token: str | None = None):
        import requests

        self.session = requests.Session()
        if token:
            self.session.headers["Authorization"] = f"token {token}"

    def status(self, url: NormalizedRepoURL) -> int:
        return self.session.head(url.canonical, allow_redirects=True, timeout=30).status_code

    def metadata(self, url: NormalizedRepoURL) -> dict:
        api = f"https://api.{url.host}/repos/{url.owner}/{url.repo}"
        response = self.session.get(api, timeout=30)
        response.raise_for_status()
        return response.json()


class PipelineDriver:
    def __init__(self, config: PipelineConfig, host=None):
        self.config = config
        config.workspace.mkdir(parents=True, exist_ok=True)
        self.store = CorpusStore(config.db_path)
        if host is not None:
            self.host = host
        elif config.offline:
            fixture_root = config.extra_env.get("NBAUDIT_FIXTURE_REPOS")
            if not fixture_root:
                raise DriverError("offline mode needs NBAUDIT_FIXTURE_REPOS in extra_env")
            self.host = FixtureHost(Path(fixture_root))
        else:
            self.host = LiveHost(config.api_token)
        self.provisioner = envsynth.Provisioner(config.manager_command)

    def close(self):
        self.store.close()

    def run(self, stages: list[str] | None = None):
        for stage in stages or STAGES:
            if stage not in STAGES:
                raise DriverError(f"unknown stage: {stage}")
            self._check_dependency(stage)
            getattr(self, f"stage_{stage}")()

    _PREREQ = {
        "harvest": ("link_extractions", "mine"),
        "inventory": ("repositories", "harvest"),
        "analyze": ("notebooks", "inventory"),
        "plan": ("notebooks", "inventory"),
        "provision": ("plans", "plan"),
        "execute": ("provisions", "provision"),
        "diff": ("executions", "execute"),
        "report": ("notebooks", "inventory"),
    }

    def _check_dependency(self, stage: str):
        prereq = self._PREREQ.get(stage)
        if prereq is None:
            return
        table, before = prereq
        if not self.store._one(f"SELECT COUNT(*) FROM {table}"):
            raise StageDependencyError(f"stage '{stage}' requires '{before}' output first")

    # ------------------------------------------------------------------

    def stage_mine(self):
        config = self.config
        if config.xml_dir is None:
            raise DriverError("live literature search requires an article XML cache; "
                              "fetch ids and XML first, then point xml_dir at them")
        for path in sorted(config.xml_dir.glob("*.xml")):
            text = path.read_text(encoding="utf-8")
            try:
                article = jats.parse_article(text)
            except jats.ArticleParseError as exc:
                logger.warning("unparseable article %s: %s", path.name, exc)
                continue
            self.store.upsert_article(article)
            for extraction in jats.extract_github_links(text):
                canonical = extraction.normalized.canonical if extraction.normalized else None
                self.store.record_link_extraction(
                    article.pmcid, extraction.raw, extraction.disposition, canonical
                )

    def stage_harvest(self):
        config = self.config
        rows = self.store.query(
            """SELECT canonical, GROUP_CONCAT(DISTINCT pmcid) AS pmcids
               FROM link_extractions WHERE disposition = 'normalized'
               GROUP BY canonical ORDER BY MIN(id)"""
        )
        clones_dir = config.workspace / "clones"
        for row in rows:
            canonical = row["canonical"]
            if self.store._one("SELECT COUNT(*) FROM repositories WHERE id = ?", (canonical,)):
                self._link_articles(canonical, row["pmcids"])
                continue
            url = _url_from_canonical(canonical)
            try:
                verdict, status = harvest.check_accessibility(url, self.host)
            except harvest.AccessibilityUnknown as exc:
                logger.warning("skipping %s: %s", canonical, exc)
                continue
            if verdict != "accessible":
                record = harvest.RepositoryRecord(url=url, accessible=False, status=status)
                self.store.upsert_repository(record)
                self._link_articles(canonical, row["pmcids"])
                continue
            article_dates = self._dates_for(row["pmcids"])
            record = harvest.fetch_repo_metadata(url, self.host, article_dates)
            record.status = status
            harvest_error = None
            try:
                dest = harvest.clone_destination(url, clones_dir)
                if not dest.exists():
                    harvest.clone_default_branch(url, clones_dir, config.clone_template)
                record.clone_path = dest
            except harvest.HarvestError as exc:
                harvest_error = str(exc)
            self.store.upsert_repository(record, harvest_error=harvest_error)
            self._link_articles(canonical, row["pmcids"])

    def _link_articles(self, canonical: str, pmcids: str | None):
        for pmcid in (pmcids or "").split(","):
            if pmcid:
                self.store.link_article_repo(pmcid, canonical)

    def _dates_for(self, pmcids: str | None) -> dict[str, str]:
        first = (pmcids or "").split(",")[0]
        if not first:
            return {}
        row = self.store.query(
            "SELECT received, accepted, published FROM articles WHERE pmcid = ?", (first,)
        )
        if not row:
            return {}
        return {k: v for k, v in dict(row[0]).items() if v}

    def stage_inventory(self):
        for repo in self.store.query(
            "SELECT id, clone_path FROM repositories WHERE accessible = 1 AND clone_path IS NOT NULL"
        ):
            clone_path = Path(repo["clone_path"])
            if not clone_path.exists():
                continue
            for rel, readable in harvest.find_notebooks(clone_path):
                nb_id = self.store.notebook_id(repo["id"], rel)
                if self.store._one("SELECT COUNT(*) FROM notebooks WHERE id = ?", (nb_id,)):
                    continue
                if not readable:
                    self.store.insert_notebook(repo["id"], rel, None, None, "unreadable")
                    continue
                try:
                    record, cells = parse_notebook(clone_path / rel, repo["id"], rel)
                except InvalidNotebook as exc:
                    self.store.insert_notebook(repo["id"], rel, None, None, str(exc))
                    continue
                self.store.insert_notebook(repo["id"], rel, record, cells)

    def stage_analyze(self):
        for nb in self.store.query(
            "SELECT id, repo_id, path FROM notebooks WHERE valid = 1 AND language = 'python'"
        ):
            if self.store._one("SELECT COUNT(*) FROM imports WHERE notebook_id = ?", (nb["id"],)) \
                    or self.store._one("SELECT COUNT(*) FROM style_findings WHERE notebook_id = ?", (nb["id"],)):
                continue
            sources = [
                row["source"] for row in self.store.query(
                    "SELECT source FROM cells WHERE notebook_id = ? AND kind = 'code' ORDER BY idx",
                    (nb["id"],),
                )
            ]
            records = imports_mod.extract_imports(sources, nb["id"])
            repo = self.store.query(
                "SELECT clone_path FROM repositories WHERE id = ?", (nb["repo_id"],)
            )[0]
            repo_root = Path(repo["clone_path"]) if repo["clone_path"] else None
            nb_dir = str(Path(nb["path"]).parent)
            records = [
                dataclasses.replace(
                    r, locality=imports_mod.classify_import_locality(r, repo_root, nb_dir)
                )
                for r in records
            ]
            self.store.insert_imports(nb["id"], records)
            self.store.insert_style_findings(nb["id"], style.style_check(sources, nb["id"]))

    def stage_plan(self):
        config = self.config
        spec_cache: dict[str, list] = {}
        for nb in self.store.query(
            """SELECT n.id, n.repo_id, n.language, n.language_version, r.clone_path
               FROM notebooks n JOIN repositories r ON r.id = n.repo_id
               WHERE n.valid = 1 AND n.language = 'python'"""
        ):
            if self.store._one("SELECT COUNT(*) FROM plans WHERE notebook_id = ?", (nb["id"],)):
                continue
            repo_id = nb["repo_id"]
            if repo_id not in spec_cache:
                specs = []
                if nb["clone_path"]:
                    specs = envsynth.discover_dependency_files(Path(nb["clone_path"]), repo_id)
                    for spec in specs:
                        self.store.insert_dependency_spec(spec)
                spec_cache[repo_id] = specs
            specs = spec_cache[repo_id]
            if config.attempt_policy == "declared_only" and not specs:
                continue  # notebook stays not_attempted
            plan = envsynth.build_plan(
                nb["language"], nb["language_version"], nb["id"], specs,
                manager_command=config.manager_command,
                default_version=config.default_interpreter,
            )
            self.store.insert_plan(plan)

    def stage_provision(self):
        for row in self.store.query(
            """SELECT p.* FROM plans p
               LEFT JOIN provisions pr ON pr.notebook_id = p.notebook_id
               WHERE pr.notebook_id IS NULL"""
        ):
            plan = envsynth.EnvironmentPlan(
                notebook_id=row["notebook_id"],
                interpreter_version=row["interpreter_version"],
                packages=[tuple(p) for p in json.loads(row["packages"])],
                fallback_kitchen_sink=bool(row["fallback_kitchen_sink"]),
                version_defaulted=bool(row["version_defaulted"]),
                manager_command=self.config.manager_command,
            )
            self.store.insert_provision(self.provisioner.provision(plan))

    def stage_execute(self):
        config = self.config
        limits = harness.ExecutionLimits(
            notebook_timeout_s=config.notebook_timeout_s,
            cell_timeout_s=config.cell_timeout_s,
            output_cap_bytes=config.output_cap_bytes,
        )
        records_dir = config.workspace / "records"
        records_dir.mkdir(parents=True, exist_ok=True)
        for row in self.store.query(
            """SELECT pr.notebook_id, pr.env_handle, n.repo_id, n.path, r.clone_path
               FROM provisions pr
               JOIN notebooks n ON n.id = pr.notebook_id
               JOIN repositories r ON r.id = n.repo_id
               WHERE pr.status = 'ready' ORDER BY pr.notebook_id"""
        ):
            nb_id = row["notebook_id"]
            if self.store.has_execution(nb_id):
                continue
            notebook_path = Path(row["clone_path"]) / row["path"]
            record_path = records_dir / (hashlib.sha1(nb_id.encode()).hexdigest() + ".json")
            executor = config.executor_command
            if "{env}" in executor:
                executor = executor.format(env=row["env_handle"])
            record = harness.execute_notebook(
                notebook_path, nb_id, row["env_handle"] or "", executor, limits,
                record_path, extra_env=config.extra_env or None,
            )
            self.store.insert_execution(record)
            if config.execute_throttle_s:
                time.sleep(config.execute_throttle_s)

    def stage_diff(self):
        for row in self.store.query(
            """SELECT e.notebook_id, e.cell_results FROM executions e
               LEFT JOIN diffs d ON d.notebook_id = e.notebook_id
               WHERE e.attempt = 1 AND e.status = 'completed' AND d.notebook_id IS NULL"""
        ):
            nb_id = row["notebook_id"]
            cells = [
                CellRecord(
                    index=c["idx"], kind=c["kind"], source=c["source"],
                    execution_count=c["execution_count"],
                    outputs=json.loads(c["outputs"]),
                )
                for c in self.store.query(
                    "SELECT * FROM cells WHERE notebook_id = ? ORDER BY idx", (nb_id,)
                )
            ]
            executed = {
                c["index"]: c.get("outputs", [])
                for c in json.loads(row["cell_results"])
            }
            self.store.insert_diff(compare(cells, executed, nb_id))

    def stage_report(self):
        written = self.store.emit_reports(self.config.reports_dir)
        logger.info("wrote %d report files", len(written))


def _url_from_canonical(canonical: str) -> NormalizedRepoURL:
    host, owner, repo = canonical.removeprefix("https://").split("/")
    return NormalizedRepoURL(host, owner, repo)
