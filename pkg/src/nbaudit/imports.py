"""Static import extraction and locality classification for notebook code.

Cells are parsed jointly as one concatenated module when possible; cells
that break the joint parse fall back to a per-cell parse and finally to a
line-level scanner, with the degraded mode recorded on each record.
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass
from pathlib import Path

_LOAD_EXT_RE = re.compile(r"^\s*%load_ext\s+([A-Za-z0-9_.]+)")
_MAGIC_OR_SHELL_RE = re.compile(r"^\s*[%!]")


@dataclass(frozen=True)
class ImportRecord:
    notebook_id: str
    module: str
    form: str  # plain_import | from_import | load_ext
    locality: str = "unresolved"  # local | external | unresolved
    fallback: bool = False

    @property
    def top_level(self) -> str:
        return self.module.split(".", 1)[0]


def _strip_notebook_syntax(source: str) -> str:
    """Blank out line magics and shell escapes so the AST can parse the rest."""
    lines = []
    for line in source.splitlines():
        lines.append("" if _MAGIC_OR_SHELL_RE.match(line) else line)
    return "\n".join(lines)


def _imports_from_tree(tree: ast.AST, notebook_id: str, fallback: bool) -> list[ImportRecord]:
    records = []
    for node in ast.walk(tree):
        if isinstance(node, ast.Import):
            for alias in node.names:
                records.append(ImportRecord(notebook_id, alias.name, "plain_import", fallback=fallback))
        elif isinstance(node, ast.ImportFrom):
            if node.level:  # relative import: module may be None
                module = "." * node.level + (node.module or "")
            else:
                module = node.module or ""
            if module:
                records.append(ImportRecord(notebook_id, module, "from_import", fallback=fallback))
    return records


_LINE_IMPORT_RE = re.compile(r"^\s*import\s+(.+)$")
_LINE_FROM_RE = re.compile(r"^\s*from\s+([A-Za-z0-9_.]+)\s+import\b")


def _line_scan(source: str, notebook_id: str) -> list[ImportRecord]:
    """Last-resort scanner for syntactically broken cells."""
    records = []
    for line in source.splitlines():
        if _MAGIC_OR_SHELL_RE.match(line) or line.lstrip().startswith("#"):
            continue
        m = _LINE_FROM_RE.match(line)
        if m:
            records.append(ImportRecord(notebook_id, m.group(1), "from_import", fallback=True))
            continue
        m = _LINE_IMPORT_RE.match(line)
        if m:
            clause = m.group(1).split("#", 1)[0]
            for part in clause.split(","):
                name = part.strip().split(" as ", 1)[0].strip()
                if re.fullmatch(r"[A-Za-z0-9_.]+", name):
                    records.append(ImportRecord(notebook_id, name, "plain_import", fallback=True))
    return records


def _load_extensions(source: str, notebook_id: str) -> list[ImportRecord]:
    return [
        ImportRecord(notebook_id, m.group(1), "load_ext")
        for line in source.splitlines()
        if (m := _LOAD_EXT_RE.match(line))
    ]


def extract_imports(cell_sources: list[str], notebook_id: str = "") -> list[ImportRecord]:
    """Extract import records from the code cells of one notebook.

    Strings and comments never contribute; ``%load_ext`` line magics are
    recorded as their own form.
    """
    records: list[ImportRecord] = []
    stripped = [_strip_notebook_syntax(src) for src in cell_sources]
    try:
        tree = ast.parse("\n".join(stripped))
    except SyntaxError:
        tree = None

    if tree is not None:
        records.extend(_imports_from_tree(tree, notebook_id, fallback=False))
    else:
        for source in stripped:
            try:
                cell_tree = ast.parse(source)
            except SyntaxError:
                records.extend(_line_scan(source, notebook_id))
            else:
                records.extend(_imports_from_tree(cell_tree, notebook_id, fallback=True))

    for source in cell_sources:
        records.extend(_load_extensions(source, notebook_id))
    return records


def classify_import_locality(record: ImportRecord, repo_root: Path | None, notebook_dir: str) -> str:
    """``local`` iff the top-level module resolves to a file or package in the
    notebook's directory or any ancestor up to the repository root."""
    if repo_root is None or not repo_root.exists():
        return "unresolved"
    top = record.top_level.lstrip(".")
    if not top:
        return "local"  # bare relative import resolves beside the notebook
    root = repo_root.resolve()
    current = (root / notebook_dir).resolve() if notebook_dir else root
    if current != root and root not in current.parents:
        current = root
    while True:
        if (current / f"{top}.py").exists() or (current / top / "__init__.py").exists():
            return "local"
        if current == root:
            return "external"
        current = current.parent


def aggregate_module_usage(notebook_modules: dict[str, set[str]]) -> list[tuple[str, int]]:
    """Rank declared modules by the number of notebooks using them.

    Input maps notebook id to its set of declared module names; a module
    imported twice in one notebook counts once.  Descending by count, ties
    broken lexicographically.
    """
    counts: dict[str, int] = {}
    for modules in notebook_modules.values():
        for module in modules:
            counts[module] = counts.get(module, 0) + 1
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
