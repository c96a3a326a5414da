"""Driving notebook re-execution through the executor command contract.

The executor (the in-environment shim, or a mock honoring the same contract)
is launched as

    <executor> --notebook <path> --output-record <path> --cell-timeout <s> --workdir <dir>

Exit 0 means a record file was written, even when the notebook itself
errored: notebook errors are data, executor failures are infrastructure.
The harness owns the per-notebook wall-clock limit and kills the whole
process tree on breach.
"""

from __future__ import annotations

import json
import logging
import os
import shlex
import signal
import subprocess
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

logger = logging.getLogger(__name__)

RECORD_SCHEMA_VERSION = 1

DEFAULT_NOTEBOOK_TIMEOUT_S = 60 * 60
DEFAULT_CELL_TIMEOUT_S = 10 * 60
DEFAULT_OUTPUT_CAP_BYTES = 10 * 1024 * 1024

KNOWN_EXCEPTION_BUCKETS = {
    "ModuleNotFoundError", "ImportError", "FileNotFoundError", "IOError",
    "NameError", "AttributeError", "ValueError", "TypeError", "KeyError",
    "CalledProcessError", "HTTPError",
}


@dataclass
class CellResult:
    index: int
    status: str  # ok | error | skipped
    outputs: list[dict] = field(default_factory=list)
    duration_s: float = 0.0


@dataclass
class ExecutionRecord:
    notebook_id: str
    env_id: str
    status: str  # completed | exception | timeout | infrastructure_error
    cell_results: list[CellResult] = field(default_factory=list)
    first_exception: tuple[str | None, str | None, str | None, int] | None = None
    total_duration: float = 0.0
    started_at: str = ""
    detail: str = ""


class RecordFormatError(Exception):
    """The executor's record file does not match the wire schema."""


def parse_record_file(path: Path) -> dict:
    """Validate and load an executor record file (the shim wire format)."""
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise RecordFormatError(f"unreadable record: {exc}") from exc
    if not isinstance(doc, dict):
        raise RecordFormatError("record is not an object")
    if doc.get("schema_version") != RECORD_SCHEMA_VERSION:
        raise RecordFormatError(f"unsupported schema_version: {doc.get('schema_version')!r}")
    cells = doc.get("cells")
    if not isinstance(cells, list):
        raise RecordFormatError("record has no cells array")
    previous = -1
    for cell in cells:
        if not isinstance(cell, dict):
            raise RecordFormatError("cell entry is not an object")
        index = cell.get("index")
        if not isinstance(index, int) or index <= previous:
            raise RecordFormatError("cell indices must be strictly increasing integers")
        previous = index
        if cell.get("status") not in ("ok", "error", "skipped"):
            raise RecordFormatError(f"bad cell status: {cell.get('status')!r}")
        if not isinstance(cell.get("outputs", []), list):
            raise RecordFormatError("cell outputs must be a list")
    return doc


@dataclass
class ExecutionLimits:
    notebook_timeout_s: float = DEFAULT_NOTEBOOK_TIMEOUT_S
    cell_timeout_s: float = DEFAULT_CELL_TIMEOUT_S
    output_cap_bytes: int = DEFAULT_OUTPUT_CAP_BYTES


def execute_notebook(
    notebook_path: Path,
    notebook_id: str,
    env_id: str,
    executor_command: str,
    limits: ExecutionLimits,
    record_path: Path,
    workdir: Path | None = None,
    extra_env: dict[str, str] | None = None,
) -> ExecutionRecord:
    """Run one notebook through the executor and parse its record."""
    workdir = workdir or notebook_path.parent
    started_at = datetime.now(timezone.utc).isoformat()
    cmd = shlex.split(executor_command) + [
        "--notebook", str(notebook_path),
        "--output-record", str(record_path),
        "--cell-timeout", str(limits.cell_timeout_s),
        "--workdir", str(workdir),
    ]
    env = dict(os.environ)
    if extra_env:
        env.update(extra_env)
    started = time.monotonic()
    proc = subprocess.Popen(
        cmd, stdout=subprocess.PIPE, stderr=subprocess.PIPE,
        start_new_session=True, env=env,
    )
    try:
        stdout, stderr = proc.communicate(timeout=limits.notebook_timeout_s)
    except subprocess.TimeoutExpired:
        _kill_process_tree(proc)
        stdout, stderr = proc.communicate()
        return ExecutionRecord(
            notebook_id, env_id, "timeout",
            total_duration=time.monotonic() - started, started_at=started_at,
            detail=f"wall-clock limit {limits.notebook_timeout_s}s exceeded",
        )
    duration = time.monotonic() - started

    if proc.returncode != 0 or not record_path.exists():
        return ExecutionRecord(
            notebook_id, env_id, "infrastructure_error",
            total_duration=duration, started_at=started_at,
            detail=(stderr or b"").decode(errors="replace")[-2000:] or f"exit {proc.returncode}, no record",
        )

    if record_path.stat().st_size + len(stdout or b"") > limits.output_cap_bytes:
        return ExecutionRecord(
            notebook_id, env_id, "infrastructure_error",
            total_duration=duration, started_at=started_at,
            detail="output flood",
        )

    try:
        doc = parse_record_file(record_path)
    except RecordFormatError as exc:
        return ExecutionRecord(
            notebook_id, env_id, "infrastructure_error",
            total_duration=duration, started_at=started_at, detail=str(exc),
        )

    cells = [
        CellResult(c["index"], c["status"], list(c.get("outputs", [])), float(c.get("duration_s", 0.0)))
        for c in doc["cells"]
    ]
    first_exception = None
    status = "completed"
    for cell, raw in zip(cells, doc["cells"]):
        if cell.status == "error":
            status = "exception"
            first_exception = (raw.get("ename"), raw.get("evalue"), raw.get("traceback"), cell.index)
            break
    return ExecutionRecord(
        notebook_id, env_id, status, cell_results=cells,
        first_exception=first_exception, total_duration=duration, started_at=started_at,
    )


def _kill_process_tree(proc: subprocess.Popen) -> None:
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        proc.kill()


def classify_exception(record: ExecutionRecord) -> str:
    """Map an exception record to its bucket; totality over all records."""
    if record.status != "exception":
        raise ValueError("only exception records are classified")
    ename = (record.first_exception or (None,) * 4)[0]
    if not ename:
        return "unknown"
    if ename in KNOWN_EXCEPTION_BUCKETS:
        return ename
    return f"other({ename})"
