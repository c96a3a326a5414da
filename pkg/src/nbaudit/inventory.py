"""Parsing of notebook files and the structural / naming metrics.

Notebooks are read bit-exactly as stored JSON (format versions 3 and 4);
version-3 worksheets are flattened into the v4 cell model.  Parsing is pure,
so it is safe to parallelize per notebook.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

KNOWN_LANGUAGES = {"python", "r", "julia", "matlab", "bash", "groovy", "scala", "java", "sos"}

# Kernel names seen in the wild mapped to their language.
KERNEL_NAME_LANGUAGE = {
    "ir": "r",
    "python2": "python",
    "python3": "python",
    "bash": "bash",
    "groovy": "groovy",
    "scala": "scala",
    "java": "java",
    "sos": "sos",
    "matlab": "matlab",
}

WINDOWS_RESERVED = {"con", "prn", "aux", "nul"} | {f"com{i}" for i in range(1, 10)} | {
    f"lpt{i}" for i in range(1, 10)
}
_WINDOWS_FORBIDDEN_CHARS = set('<>:"/\\|?*')
_POSIX_RE = re.compile(r"^[A-Za-z0-9._-]+$")


@dataclass
class OutputBundle:
    output_type: str
    data: dict[str, object] = field(default_factory=dict)
    text: str | None = None  # stream content
    name: str | None = None  # stream name (stdout/stderr)
    ename: str | None = None
    evalue: str | None = None


@dataclass
class CellRecord:
    index: int
    kind: str  # code | markdown | raw
    source: str
    execution_count: int | None = None
    outputs: list[OutputBundle] = field(default_factory=list)


@dataclass
class StructureMetrics:
    total_cells: int = 0
    code_cells: int = 0
    markdown_cells: int = 0
    raw_cells: int = 0
    empty_cells: int = 0
    cells_with_output: int = 0
    max_execution_count: int | None = None
    md_code_ratio: float | None = None


@dataclass
class NameFlags:
    title: str
    title_length: int
    posix_portable: bool
    windows_allowed: bool
    is_untitled: bool
    has_copy: bool
    has_test: bool


@dataclass
class NotebookRecord:
    repo_id: str
    path: str
    nbformat_version: tuple[int, int]
    kernel_name: str | None
    language: str
    language_version: str | None
    metrics: StructureMetrics
    name_flags: NameFlags


class InvalidNotebook(Exception):
    """The file is not a parseable notebook; carries the reason."""


def _as_source(value) -> str:
    if isinstance(value, list):
        return "".join(str(v) for v in value)
    return str(value) if value is not None else ""


def _parse_output(obj: dict) -> OutputBundle:
    output_type = obj.get("output_type", "unknown")
    bundle = OutputBundle(output_type=output_type)
    if output_type == "stream":
        bundle.name = obj.get("name") or obj.get("stream")
        bundle.text = _as_source(obj.get("text", obj.get("data", "")))
    elif output_type in ("execute_result", "display_data", "pyout"):
        data = obj.get("data")
        if data is None:  # v3 layout keyed media at top level
            data = {k: v for k, v in obj.items() if "/" in k or k in ("text", "png", "jpeg", "html", "latex", "svg")}
        bundle.data = {k: _as_source(v) if isinstance(v, list) else v for k, v in (data or {}).items()}
    elif output_type in ("error", "pyerr"):
        bundle.ename = obj.get("ename")
        bundle.evalue = obj.get("evalue")
        bundle.data = {"traceback": obj.get("traceback", [])}
    else:
        bundle.data = {k: v for k, v in obj.items() if k != "output_type"}
    return bundle


def _cells_v4(doc: dict) -> list[dict]:
    cells = doc.get("cells")
    if cells is None:
        raise InvalidNotebook("missing cells array")
    if not isinstance(cells, list):
        raise InvalidNotebook("cells is not a list")
    return cells


def _cells_v3(doc: dict) -> list[dict]:
    worksheets = doc.get("worksheets")
    if worksheets is None:
        raise InvalidNotebook("missing cells array")
    flattened = []
    for sheet in worksheets:
        flattened.extend(sheet.get("cells", []))
    return flattened


def parse_notebook_cells(path: Path) -> tuple[dict, list[CellRecord]]:
    """Load the raw document and the flattened cell list; raises InvalidNotebook."""
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InvalidNotebook(f"json parse: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidNotebook("not a notebook object")
    major = doc.get("nbformat")
    if not isinstance(major, int) or major < 3:
        raise InvalidNotebook(f"unsupported nbformat: {major!r}")

    raw_cells = _cells_v4(doc) if major >= 4 else _cells_v3(doc)
    records: list[CellRecord] = []
    for index, cell in enumerate(raw_cells):
        kind = cell.get("cell_type", "code")
        if kind in ("heading",):  # v3 heading cells render as markdown
            kind = "markdown"
        source = _as_source(cell.get("source", cell.get("input", "")))
        record = CellRecord(index=index, kind=kind, source=source)
        if kind == "code":
            count = cell.get("execution_count", cell.get("prompt_number"))
            record.execution_count = count if isinstance(count, int) and count >= 0 else None
            record.outputs = [_parse_output(o) for o in cell.get("outputs", []) if isinstance(o, dict)]
        records.append(record)
    return doc, records


def detect_language_version(doc: dict) -> tuple[str, str | None]:
    """Language precedence: language_info.name, kernelspec.language, kernel-name heuristics."""
    metadata = doc.get("metadata") or {}
    info = metadata.get("language_info") or {}
    kernelspec = metadata.get("kernelspec") or {}

    language = None
    for candidate in (info.get("name"), kernelspec.get("language")):
        if candidate:
            language = str(candidate).lower()
            break
    if language is None:
        kernel_name = str(kernelspec.get("name", "")).lower()
        language = KERNEL_NAME_LANGUAGE.get(kernel_name)
    if language is None:
        # v3 notebooks: per-cell language fields, no standard metadata
        return "unknown", None
    if language not in KNOWN_LANGUAGES:
        return f"other({language})", None

    version = info.get("version")
    if version:
        parts = str(version).split(".")
        version = ".".join(parts[:2])
    else:
        version = None
    return language, version


def compute_structure_metrics(cells: list[CellRecord]) -> StructureMetrics:
    m = StructureMetrics(total_cells=len(cells))
    execution_counts = []
    for cell in cells:
        if cell.kind == "code":
            m.code_cells += 1
            if cell.outputs:
                m.cells_with_output += 1
            if cell.execution_count is not None:
                execution_counts.append(cell.execution_count)
        elif cell.kind == "markdown":
            m.markdown_cells += 1
        elif cell.kind == "raw":
            m.raw_cells += 1
        if not cell.source.strip():
            m.empty_cells += 1
    m.max_execution_count = max(execution_counts) if execution_counts else None
    m.md_code_ratio = m.markdown_cells / m.code_cells if m.code_cells else None
    return m


def check_name(path: str | Path) -> NameFlags:
    """Compute naming flags from the basename minus the final ``.ipynb`` only."""
    name = Path(path).name
    title = name[: -len(".ipynb")] if name.endswith(".ipynb") else name
    lowered = title.lower()
    posix = bool(_POSIX_RE.match(title)) and not title.startswith("-")
    stem = lowered.split(".", 1)[0]
    windows = stem not in WINDOWS_RESERVED and not (_WINDOWS_FORBIDDEN_CHARS & set(title))
    return NameFlags(
        title=title,
        title_length=len(title),
        posix_portable=posix,
        windows_allowed=windows,
        is_untitled=lowered.startswith("untitled"),
        has_copy="copy" in lowered,
        has_test="test" in lowered,
    )


def parse_notebook(path: Path, repo_id: str = "", rel_path: str | None = None):
    """Parse a notebook file into (NotebookRecord, cells); raises InvalidNotebook."""
    doc, cells = parse_notebook_cells(path)
    language, version = detect_language_version(doc)
    kernelspec = (doc.get("metadata") or {}).get("kernelspec") or {}
    record = NotebookRecord(
        repo_id=repo_id,
        path=rel_path or path.name,
        nbformat_version=(doc.get("nbformat", 0), doc.get("nbformat_minor", 0)),
        kernel_name=kernelspec.get("name"),
        language=language,
        language_version=version,
        metrics=compute_structure_metrics(cells),
        name_flags=check_name(path),
    )
    return record, cells
