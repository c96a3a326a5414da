"""Single-file relational store for every pipeline entity, plus reports.

Append-mostly: outcomes are recomputed views over the stage tables, never
hand-edited rows.  One writer at a time (serialized through a lock); reports
run read-only queries.  Reports are emitted as CSV and JSON side by side.
"""

from __future__ import annotations

import csv
import json
import sqlite3
import threading
from dataclasses import asdict
from pathlib import Path

from .diffing import DiffResult, FunnelState, classify_outcome
from .envsynth import DependencySpec, EnvironmentPlan, ProvisionResult
from .harness import ExecutionRecord, classify_exception
from .harvest import RepositoryRecord
from .inventory import CellRecord, NotebookRecord
from .jats import ArticleRecord

SCHEMA_VERSION = 1

_SCHEMA = """
PRAGMA foreign_keys = ON;

CREATE TABLE IF NOT EXISTS meta (
    key TEXT PRIMARY KEY,
    value TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS journals (
    id INTEGER PRIMARY KEY,
    issn TEXT,
    title TEXT,
    abbreviations TEXT,
    UNIQUE (issn, title)
);

CREATE TABLE IF NOT EXISTS articles (
    pmcid TEXT PRIMARY KEY,
    pmid TEXT, doi TEXT, title TEXT,
    journal_id INTEGER REFERENCES journals(id),
    received TEXT, accepted TEXT, published TEXT,
    license TEXT, copyright TEXT,
    keywords TEXT NOT NULL DEFAULT '[]',
    subject_tags TEXT NOT NULL DEFAULT '[]',
    mesh_terms TEXT NOT NULL DEFAULT '[]'
);

CREATE TABLE IF NOT EXISTS authors (
    id INTEGER PRIMARY KEY,
    pmcid TEXT NOT NULL REFERENCES articles(pmcid),
    given TEXT, family TEXT, orcid TEXT, email TEXT
);

CREATE TABLE IF NOT EXISTS link_extractions (
    id INTEGER PRIMARY KEY,
    pmcid TEXT NOT NULL REFERENCES articles(pmcid),
    raw TEXT NOT NULL,
    disposition TEXT NOT NULL,
    canonical TEXT,
    UNIQUE (pmcid, raw)
);

CREATE TABLE IF NOT EXISTS repositories (
    id TEXT PRIMARY KEY,              -- canonical URL
    owner TEXT NOT NULL, repo TEXT NOT NULL,
    accessible INTEGER, status INTEGER, redirected INTEGER DEFAULT 0,
    clone_path TEXT, default_branch TEXT,
    created TEXT, updated TEXT, pushed TEXT,
    languages TEXT NOT NULL DEFAULT '{}',
    subscribers INTEGER DEFAULT 0, forks INTEGER DEFAULT 0,
    open_issues INTEGER DEFAULT 0, releases INTEGER DEFAULT 0,
    license TEXT, commits_after TEXT NOT NULL DEFAULT '{}',
    metadata_incomplete INTEGER DEFAULT 0,
    harvest_error TEXT
);

CREATE TABLE IF NOT EXISTS article_repos (
    pmcid TEXT NOT NULL REFERENCES articles(pmcid),
    repo_id TEXT NOT NULL REFERENCES repositories(id),
    UNIQUE (pmcid, repo_id)
);

CREATE TABLE IF NOT EXISTS notebooks (
    id TEXT PRIMARY KEY,              -- repo_id ':' path
    repo_id TEXT NOT NULL REFERENCES repositories(id),
    path TEXT NOT NULL,
    valid INTEGER NOT NULL,
    invalid_reason TEXT,
    nbformat_major INTEGER, nbformat_minor INTEGER,
    kernel_name TEXT, language TEXT, language_version TEXT,
    total_cells INTEGER, code_cells INTEGER, markdown_cells INTEGER,
    raw_cells INTEGER, empty_cells INTEGER, cells_with_output INTEGER,
    max_execution_count INTEGER, md_code_ratio REAL,
    title TEXT, title_length INTEGER,
    posix_portable INTEGER, windows_allowed INTEGER,
    is_untitled INTEGER, has_copy INTEGER, has_test INTEGER
);

CREATE TABLE IF NOT EXISTS cells (
    notebook_id TEXT NOT NULL REFERENCES notebooks(id),
    idx INTEGER NOT NULL,
    kind TEXT NOT NULL,
    source TEXT NOT NULL,
    execution_count INTEGER,
    outputs TEXT NOT NULL DEFAULT '[]',
    PRIMARY KEY (notebook_id, idx)
);

CREATE TABLE IF NOT EXISTS imports (
    id INTEGER PRIMARY KEY,
    notebook_id TEXT NOT NULL REFERENCES notebooks(id),
    module TEXT NOT NULL,
    form TEXT NOT NULL,
    locality TEXT NOT NULL,
    fallback INTEGER NOT NULL DEFAULT 0
);

CREATE TABLE IF NOT EXISTS style_findings (
    id INTEGER PRIMARY KEY,
    notebook_id TEXT NOT NULL REFERENCES notebooks(id),
    cell_index INTEGER, line INTEGER, column INTEGER,
    code TEXT NOT NULL, description TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS dependency_specs (
    id INTEGER PRIMARY KEY,
    repo_id TEXT NOT NULL REFERENCES repositories(id),
    source_kind TEXT NOT NULL,
    path TEXT NOT NULL,
    entries TEXT NOT NULL DEFAULT '[]',
    unparsed INTEGER NOT NULL DEFAULT 0,
    UNIQUE (repo_id, path)
);

CREATE TABLE IF NOT EXISTS plans (
    notebook_id TEXT PRIMARY KEY REFERENCES notebooks(id),
    interpreter_version TEXT NOT NULL,
    packages TEXT NOT NULL,
    fallback_kitchen_sink INTEGER NOT NULL,
    version_defaulted INTEGER NOT NULL,
    cache_key TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS provisions (
    notebook_id TEXT PRIMARY KEY REFERENCES plans(notebook_id),
    status TEXT NOT NULL,
    env_handle TEXT,
    log_excerpt TEXT,
    wall_time REAL,
    cached INTEGER NOT NULL DEFAULT 0
);

CREATE TABLE IF NOT EXISTS executions (
    notebook_id TEXT NOT NULL REFERENCES notebooks(id),
    attempt INTEGER NOT NULL,
    env_id TEXT,
    status TEXT NOT NULL,
    exception_bucket TEXT,
    first_ename TEXT, first_evalue TEXT, first_traceback TEXT, first_cell INTEGER,
    total_duration REAL, started_at TEXT, detail TEXT,
    cell_results TEXT NOT NULL DEFAULT '[]',
    PRIMARY KEY (notebook_id, attempt)
);

CREATE TABLE IF NOT EXISTS diffs (
    notebook_id TEXT PRIMARY KEY REFERENCES notebooks(id),
    verdict TEXT NOT NULL,
    diff_count INTEGER NOT NULL,
    diffs TEXT NOT NULL DEFAULT '[]'
);

CREATE TABLE IF NOT EXISTS outcomes (
    notebook_id TEXT PRIMARY KEY REFERENCES notebooks(id),
    outcome TEXT NOT NULL
);
"""

FUNNEL_STAGES = [
    "links_found", "unique_repos", "accessible", "with_notebooks",
    "notebooks_total", "valid", "python", "attempted", "install_failed",
    "executed", "exception", "timeout", "completed", "identical", "different",
]


class IntegrityError(Exception):
    """A cross-reference or funnel relation is violated; names the relation."""


class CorpusStore:
    def __init__(self, path: Path | str):
        self.path = str(path)
        self._lock = threading.Lock()
        self._conn = sqlite3.connect(self.path, check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        self._conn.executescript(_SCHEMA)
        self._conn.execute(
            "INSERT OR IGNORE INTO meta (key, value) VALUES ('schema_version', ?)",
            (str(SCHEMA_VERSION),),
        )
        self._conn.commit()

    def close(self):
        self._conn.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _write(self, sql: str, params=()):
        with self._lock:
            cur = self._conn.execute(sql, params)
            self._conn.commit()
            return cur

    # ------------------------------------------------------------------
    # inserts
    # ------------------------------------------------------------------

    def upsert_article(self, article: ArticleRecord):
        with self._lock:
            journal_id = None
            j = article.journal
            if j.issn or j.title:
                self._conn.execute(
                    "INSERT OR IGNORE INTO journals (issn, title, abbreviations) VALUES (?,?,?)",
                    (j.issn, j.title, json.dumps(j.abbreviations)),
                )
                journal_id = self._conn.execute(
                    "SELECT id FROM journals WHERE issn IS ? AND title IS ?", (j.issn, j.title)
                ).fetchone()["id"]
            self._conn.execute(
                """INSERT OR REPLACE INTO articles
                   (pmcid, pmid, doi, title, journal_id, received, accepted, published,
                    license, copyright, keywords, subject_tags, mesh_terms)
                   VALUES (?,?,?,?,?,?,?,?,?,?,?,?,?)""",
                (article.pmcid, article.pmid, article.doi, article.title, journal_id,
                 article.received, article.accepted, article.published,
                 article.license, article.copyright,
                 json.dumps(article.keywords), json.dumps(article.subject_tags),
                 json.dumps(article.mesh_top_terms)),
            )
            self._conn.execute("DELETE FROM authors WHERE pmcid = ?", (article.pmcid,))
            for author in article.authors:
                self._conn.execute(
                    "INSERT INTO authors (pmcid, given, family, orcid, email) VALUES (?,?,?,?,?)",
                    (article.pmcid, author.given, author.family, author.orcid, author.email),
                )
            self._conn.commit()

    def record_link_extraction(self, pmcid: str, raw: str, disposition: str, canonical: str | None):
        self._write(
            "INSERT OR IGNORE INTO link_extractions (pmcid, raw, disposition, canonical) VALUES (?,?,?,?)",
            (pmcid, raw, disposition, canonical),
        )

    def upsert_repository(self, record: RepositoryRecord, harvest_error: str | None = None):
        self._write(
            """INSERT OR REPLACE INTO repositories
               (id, owner, repo, accessible, status, redirected, clone_path, default_branch,
                created, updated, pushed, languages, subscribers, forks, open_issues,
                releases, license, commits_after, metadata_incomplete, harvest_error)
               VALUES (?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?)""",
            (record.url.canonical, record.url.owner, record.url.repo,
             int(record.accessible), record.status, int(record.redirected),
             str(record.clone_path) if record.clone_path else None,
             record.default_branch, record.created, record.updated, record.pushed,
             json.dumps(record.languages), record.subscribers, record.forks,
             record.open_issues, record.releases, record.license,
             json.dumps(record.commits_after), int(record.metadata_incomplete),
             harvest_error),
        )

    def link_article_repo(self, pmcid: str, repo_id: str):
        self._write(
            "INSERT OR IGNORE INTO article_repos (pmcid, repo_id) VALUES (?,?)", (pmcid, repo_id)
        )

    @staticmethod
    def notebook_id(repo_id: str, path: str) -> str:
        return f"{repo_id}:{path}"

    def insert_notebook(self, repo_id: str, path: str, record: NotebookRecord | None,
                        cells: list[CellRecord] | None, invalid_reason: str | None = None) -> str:
        nb_id = self.notebook_id(repo_id, path)
        with self._lock:
            if record is None:
                self._conn.execute(
                    """INSERT OR REPLACE INTO notebooks (id, repo_id, path, valid, invalid_reason)
                       VALUES (?,?,?,0,?)""",
                    (nb_id, repo_id, path, invalid_reason or "unknown"),
                )
            else:
                m, f = record.metrics, record.name_flags
                self._conn.execute(
                    """INSERT OR REPLACE INTO notebooks
                       (id, repo_id, path, valid, invalid_reason, nbformat_major, nbformat_minor,
                        kernel_name, language, language_version,
                        total_cells, code_cells, markdown_cells, raw_cells, empty_cells,
                        cells_with_output, max_execution_count, md_code_ratio,
                        title, title_length, posix_portable, windows_allowed,
                        is_untitled, has_copy, has_test)
                       VALUES (?,?,?,1,NULL,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?)""",
                    (nb_id, repo_id, path, record.nbformat_version[0], record.nbformat_version[1],
                     record.kernel_name, record.language, record.language_version,
                     m.total_cells, m.code_cells, m.markdown_cells, m.raw_cells, m.empty_cells,
                     m.cells_with_output, m.max_execution_count, m.md_code_ratio,
                     f.title, f.title_length, int(f.posix_portable), int(f.windows_allowed),
                     int(f.is_untitled), int(f.has_copy), int(f.has_test)),
                )
                self._conn.execute("DELETE FROM cells WHERE notebook_id = ?", (nb_id,))
                for cell in cells or []:
                    self._conn.execute(
                        "INSERT INTO cells (notebook_id, idx, kind, source, execution_count, outputs)"
                        " VALUES (?,?,?,?,?,?)",
                        (nb_id, cell.index, cell.kind, cell.source, cell.execution_count,
                         json.dumps([asdict(o) for o in cell.outputs])),
                    )
            self._conn.commit()
        return nb_id

    def insert_imports(self, nb_id: str, records):
        with self._lock:
            self._conn.execute("DELETE FROM imports WHERE notebook_id = ?", (nb_id,))
            for r in records:
                self._conn.execute(
                    "INSERT INTO imports (notebook_id, module, form, locality, fallback) VALUES (?,?,?,?,?)",
                    (nb_id, r.module, r.form, r.locality, int(r.fallback)),
                )
            self._conn.commit()

    def insert_style_findings(self, nb_id: str, findings):
        with self._lock:
            self._conn.execute("DELETE FROM style_findings WHERE notebook_id = ?", (nb_id,))
            for f in findings:
                self._conn.execute(
                    "INSERT INTO style_findings (notebook_id, cell_index, line, column, code, description)"
                    " VALUES (?,?,?,?,?,?)",
                    (nb_id, f.cell_index, f.line, f.column, f.code, f.description),
                )
            self._conn.commit()

    def insert_dependency_spec(self, spec: DependencySpec):
        self._write(
            """INSERT OR REPLACE INTO dependency_specs (repo_id, source_kind, path, entries, unparsed)
               VALUES (?,?,?,?,?)""",
            (spec.repo_id, spec.source_kind, spec.path, json.dumps(spec.entries), int(spec.unparsed)),
        )

    def insert_plan(self, plan: EnvironmentPlan):
        self._write(
            """INSERT OR REPLACE INTO plans
               (notebook_id, interpreter_version, packages, fallback_kitchen_sink,
                version_defaulted, cache_key)
               VALUES (?,?,?,?,?,?)""",
            (plan.notebook_id, plan.interpreter_version, json.dumps(plan.packages),
             int(plan.fallback_kitchen_sink), int(plan.version_defaulted), plan.cache_key),
        )

    def insert_provision(self, result: ProvisionResult):
        self._write(
            """INSERT OR REPLACE INTO provisions
               (notebook_id, status, env_handle, log_excerpt, wall_time, cached)
               VALUES (?,?,?,?,?,?)""",
            (result.plan_id, result.status, result.env_handle, result.log_excerpt,
             result.wall_time, int(result.cached)),
        )

    def insert_execution(self, record: ExecutionRecord, attempt: int = 1):
        bucket = classify_exception(record) if record.status == "exception" else None
        first = record.first_exception or (None, None, None, None)
        self._write(
            """INSERT OR REPLACE INTO executions
               (notebook_id, attempt, env_id, status, exception_bucket,
                first_ename, first_evalue, first_traceback, first_cell,
                total_duration, started_at, detail, cell_results)
               VALUES (?,?,?,?,?,?,?,?,?,?,?,?,?)""",
            (record.notebook_id, attempt, record.env_id, record.status, bucket,
             first[0], first[1], first[2], first[3],
             record.total_duration, record.started_at, record.detail,
             json.dumps([asdict(c) for c in record.cell_results])),
        )

    def insert_diff(self, result: DiffResult):
        self._write(
            "INSERT OR REPLACE INTO diffs (notebook_id, verdict, diff_count, diffs) VALUES (?,?,?,?)",
            (result.notebook_id, result.verdict, result.diff_count,
             json.dumps([asdict(d) for d in result.diffs])),
        )

    # ------------------------------------------------------------------
    # queries
    # ------------------------------------------------------------------

    def _one(self, sql: str, params=()):
        return self._conn.execute(sql, params).fetchone()[0]

    def query(self, sql: str, params=()) -> list[sqlite3.Row]:
        return self._conn.execute(sql, params).fetchall()

    def has_execution(self, nb_id: str, attempt: int = 1) -> bool:
        return bool(self._one(
            "SELECT COUNT(*) FROM executions WHERE notebook_id = ? AND attempt = ?", (nb_id, attempt)
        ))

    def compute_outcomes(self) -> dict[str, int]:
        """Recompute the per-notebook outcome view from the stage tables."""
        rows = self._conn.execute(
            """SELECT n.id, n.valid, n.language,
                      p.notebook_id AS planned, pr.status AS provision_status,
                      e.status AS execution_status, e.exception_bucket,
                      d.diff_count
               FROM notebooks n
               LEFT JOIN plans p ON p.notebook_id = n.id
               LEFT JOIN provisions pr ON pr.notebook_id = n.id
               LEFT JOIN executions e ON e.notebook_id = n.id AND e.attempt = 1
               LEFT JOIN diffs d ON d.notebook_id = n.id"""
        ).fetchall()
        counts: dict[str, int] = {}
        with self._lock:
            self._conn.execute("DELETE FROM outcomes")
            for row in rows:
                state = FunnelState(
                    valid=bool(row["valid"]),
                    language=row["language"] or "unknown",
                    attempted=row["planned"] is not None,
                    provision_status=row["provision_status"],
                    execution_status=row["execution_status"],
                    exception_bucket=row["exception_bucket"],
                    diff_count=row["diff_count"],
                )
                outcome = classify_outcome(state)
                counts[outcome] = counts.get(outcome, 0) + 1
                self._conn.execute(
                    "INSERT INTO outcomes (notebook_id, outcome) VALUES (?,?)", (row["id"], outcome)
                )
            self._conn.commit()
        return counts

    def funnel_report(self) -> dict[str, int]:
        c = self._conn
        funnel = {
            "links_found": self._one("SELECT COUNT(*) FROM link_extractions"),
            "unique_repos": self._one("SELECT COUNT(*) FROM repositories"),
            "accessible": self._one("SELECT COUNT(*) FROM repositories WHERE accessible = 1"),
            "with_notebooks": self._one(
                """SELECT COUNT(*) FROM repositories r WHERE r.accessible = 1
                   AND EXISTS (SELECT 1 FROM notebooks n WHERE n.repo_id = r.id)"""
            ),
            "notebooks_total": self._one("SELECT COUNT(*) FROM notebooks"),
            "valid": self._one("SELECT COUNT(*) FROM notebooks WHERE valid = 1"),
            "python": self._one(
                "SELECT COUNT(*) FROM notebooks WHERE valid = 1 AND language = 'python'"
            ),
            "attempted": self._one("SELECT COUNT(*) FROM provisions"),
            "install_failed": self._one(
                "SELECT COUNT(*) FROM provisions WHERE status = 'install_failed'"
            ),
            "executed": self._one("SELECT COUNT(*) FROM executions WHERE attempt = 1"),
            "exception": self._one(
                "SELECT COUNT(*) FROM executions WHERE attempt = 1 AND status = 'exception'"
            ),
            "timeout": self._one(
                "SELECT COUNT(*) FROM executions WHERE attempt = 1 AND status = 'timeout'"
            ),
            "completed": self._one(
                "SELECT COUNT(*) FROM executions WHERE attempt = 1 AND status = 'completed'"
            ),
            "identical": self._one("SELECT COUNT(*) FROM diffs WHERE verdict = 'identical'"),
            "different": self._one("SELECT COUNT(*) FROM diffs WHERE verdict = 'different'"),
        }
        self._check_funnel(funnel)
        return funnel

    def _check_funnel(self, f: dict[str, int]):
        relations = [
            ("accessible", "unique_repos"),
            ("with_notebooks", "accessible"),
            ("valid", "notebooks_total"),
            ("python", "valid"),
            ("attempted", "python"),
            ("install_failed", "attempted"),
            ("executed", "attempted"),
            ("exception", "executed"),
            ("timeout", "executed"),
            ("completed", "executed"),
            ("identical", "completed"),
            ("different", "completed"),
        ]
        for smaller, larger in relations:
            if f[smaller] > f[larger]:
                raise IntegrityError(f"funnel relation violated: {smaller} > {larger}")
        if f["install_failed"] + f["executed"] != f["attempted"]:
            raise IntegrityError("funnel relation violated: install_failed + executed != attempted")
        if f["identical"] + f["different"] != f["completed"]:
            raise IntegrityError("funnel relation violated: identical + different != completed")

    def integrity_check(self) -> list[str]:
        """Referential checks beyond what the FK pragma already enforces."""
        violations = []
        orphan_queries = {
            "article_repos->repositories": (
                "SELECT COUNT(*) FROM article_repos ar WHERE NOT EXISTS"
                " (SELECT 1 FROM repositories r WHERE r.id = ar.repo_id)"
            ),
            "provisions->plans": (
                "SELECT COUNT(*) FROM provisions p WHERE NOT EXISTS"
                " (SELECT 1 FROM plans pl WHERE pl.notebook_id = p.notebook_id)"
            ),
            "executions->provisions": (
                "SELECT COUNT(*) FROM executions e WHERE NOT EXISTS"
                " (SELECT 1 FROM provisions p WHERE p.notebook_id = e.notebook_id"
                "  AND p.status = 'ready')"
            ),
            "diffs->executions": (
                "SELECT COUNT(*) FROM diffs d WHERE NOT EXISTS"
                " (SELECT 1 FROM executions e WHERE e.notebook_id = d.notebook_id"
                "  AND e.status = 'completed')"
            ),
        }
        for relation, sql in orphan_queries.items():
            if self._one(sql):
                violations.append(relation)
        return violations

    def exception_ranking(self) -> list[tuple[str, int, float]]:
        executed = self._one("SELECT COUNT(*) FROM executions WHERE attempt = 1")
        rows = self._conn.execute(
            """SELECT exception_bucket AS bucket, COUNT(*) AS n FROM executions
               WHERE attempt = 1 AND status = 'exception'
               GROUP BY exception_bucket ORDER BY n DESC, bucket ASC"""
        ).fetchall()
        return [
            (row["bucket"], row["n"], row["n"] / executed if executed else 0.0) for row in rows
        ]

    def group_comparison(self) -> dict[str, dict]:
        """Feature table for completed notebooks grouped by diff verdict."""
        table: dict[str, dict] = {}
        for verdict in ("different", "identical"):
            rows = self._conn.execute(
                """SELECT n.*, d.diff_count, e.total_duration
                   FROM diffs d
                   JOIN notebooks n ON n.id = d.notebook_id
                   JOIN executions e ON e.notebook_id = d.notebook_id AND e.attempt = 1
                   WHERE d.verdict = ?""",
                (verdict,),
            ).fetchall()
            if not rows:
                table[verdict] = {"count": 0}
                continue
            repo_ids = {row["repo_id"] for row in rows}
            dep_counts = {"setup_file": 0, "requirements_file": 0, "pipfile": 0}
            for row in rows:
                kinds = {
                    r["source_kind"] for r in self._conn.execute(
                        "SELECT source_kind FROM dependency_specs WHERE repo_id = ?",
                        (row["repo_id"],),
                    )
                }
                for kind in kinds:
                    if kind in dep_counts:
                        dep_counts[kind] += 1

            def mean(key, rows=rows):
                values = [row[key] for row in rows if row[key] is not None]
                return sum(values) / len(values) if values else None

            per_cell = [
                row["total_duration"] / row["code_cells"]
                for row in rows if row["code_cells"] and row["total_duration"] is not None
            ]
            table[verdict] = {
                "count": len(rows),
                "repos": len(repo_ids),
                "notebooks_with_setup_py": dep_counts["setup_file"],
                "notebooks_with_requirements": dep_counts["requirements_file"],
                "notebooks_with_pipfile": dep_counts["pipfile"],
                "mean_total_cells": mean("total_cells"),
                "mean_code_cells": mean("code_cells"),
                "mean_markdown_cells": mean("markdown_cells"),
                "mean_empty_cells": mean("empty_cells"),
                "mean_md_code_ratio": mean("md_code_ratio"),
                "mean_diff_count": mean("diff_count"),
                "mean_execution_time_s": mean("total_duration"),
                "mean_execution_time_per_code_cell_s": (
                    sum(per_cell) / len(per_cell) if per_cell else None
                ),
            }
        return table

    DIMENSIONS = ("journal", "year", "mesh_term", "article_type", "repo_age",
                  "language", "interpreter_version")

    def dimension_report(self, dimension: str, metric: str = "notebooks",
                         reference_year: int = 2023) -> list[tuple[str, int, float]]:
        """Group notebooks (or exception notebooks) by a metadata dimension.

        Multi-valued dimensions (mesh_term, article_type) count a notebook
        once per value.  Empty values bucket as "unknown".  Shares are
        normalized by the total number of counted notebooks.
        """
        if dimension not in self.DIMENSIONS:
            raise ValueError(f"unknown dimension: {dimension}")
        if metric not in ("notebooks", "exceptions"):
            raise ValueError(f"unknown metric: {metric}")

        notebooks = self._conn.execute("SELECT * FROM notebooks").fetchall()
        if metric == "exceptions":
            keep = {
                row["notebook_id"] for row in self._conn.execute(
                    "SELECT notebook_id FROM executions WHERE attempt = 1 AND status = 'exception'"
                )
            }
            notebooks = [n for n in notebooks if n["id"] in keep]

        counts: dict[str, int] = {}
        total = 0
        for nb in notebooks:
            values = self._dimension_values(nb, dimension, reference_year)
            for value in values:
                counts[value] = counts.get(value, 0) + 1
                total += 1
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return [(value, n, n / total if total else 0.0) for value, n in ranked]

    def _article_rows_for_repo(self, repo_id: str):
        return self._conn.execute(
            """SELECT a.*, j.title AS journal_title FROM article_repos ar
               JOIN articles a ON a.pmcid = ar.pmcid
               LEFT JOIN journals j ON j.id = a.journal_id
               WHERE ar.repo_id = ?""",
            (repo_id,),
        ).fetchall()

    def _dimension_values(self, nb, dimension: str, reference_year: int) -> list[str]:
        if dimension == "language":
            return [nb["language"] or "unknown"]
        if dimension == "interpreter_version":
            return [nb["language_version"] or "unknown"]
        if dimension == "repo_age":
            row = self._conn.execute(
                "SELECT created FROM repositories WHERE id = ?", (nb["repo_id"],)
            ).fetchone()
            if row and row["created"]:
                return [str(reference_year - int(row["created"][:4]))]
            return ["unknown"]
        articles = self._article_rows_for_repo(nb["repo_id"])
        if not articles:
            return ["unknown"]
        values = []
        for article in articles:
            if dimension == "journal":
                values.append(article["journal_title"] or "unknown")
            elif dimension == "year":
                values.append(article["published"][:4] if article["published"] else "unknown")
            elif dimension == "mesh_term":
                values.extend(json.loads(article["mesh_terms"]) or ["unknown"])
            elif dimension == "article_type":
                values.extend(json.loads(article["subject_tags"]) or ["unknown"])
        return values or ["unknown"]

    # ------------------------------------------------------------------
    # report emission
    # ------------------------------------------------------------------

    def emit_reports(self, out_dir: Path) -> list[Path]:
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        outcome_counts = self.compute_outcomes()
        funnel = self.funnel_report()
        written += _emit(out_dir, "funnel", [{"stage": k, "count": v} for k, v in funnel.items()])
        written += _emit(out_dir, "outcomes", [
            {"outcome": k, "count": v} for k, v in sorted(outcome_counts.items())
        ])
        written += _emit(out_dir, "exceptions", [
            {"bucket": b, "count": n, "share": s} for b, n, s in self.exception_ranking()
        ])
        comparison = self.group_comparison()
        written += _emit(out_dir, "group_comparison", [
            {"group": group, **{k: v for k, v in values.items()}}
            for group, values in comparison.items()
        ])
        return written


def _emit(out_dir: Path, name: str, rows: list[dict]) -> list[Path]:
    json_path = out_dir / f"{name}.json"
    csv_path = out_dir / f"{name}.csv"
    json_path.write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        if rows:
            fieldnames = sorted({key for row in rows for key in row}, key=lambda k: (k != "stage", k))
            writer = csv.DictWriter(fh, fieldnames=fieldnames)
            writer.writeheader()
            writer.writerows(rows)
    return [json_path, csv_path]
