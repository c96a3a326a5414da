"""In-process notebook executor for hermetic (offline) runs.

Honors the executor command contract so fixture pipelines exercise the real
harness path without provisioned environments.  Code cells run top-to-bottom
in a single namespace; the first error stops execution and the remaining
cells are recorded as skipped.

Usage: python3 -m nbaudit.mock_executor --notebook N --output-record R
       --cell-timeout S --workdir D
"""

from __future__ import annotations

import argparse
import ast
import io
import json
import os
import signal
import sys
import time
import traceback
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

SCHEMA_VERSION = 1


class CellTimeoutError(Exception):
    pass


def _alarm_handler(signum, frame):
    raise CellTimeoutError("cell timeout")


def run_cell(source: str, namespace: dict, cell_timeout: float) -> tuple[str, list[dict], dict]:
    """Execute one code cell; returns (status, outputs, error fields)."""
    outputs: list[dict] = []
    error: dict = {}
    stdout_buf, stderr_buf = io.StringIO(), io.StringIO()

    # Notebook front-end conveniences the fixtures rely on: magics and
    # shell escapes become no-ops.
    cleaned = "\n".join(
        "" if line.lstrip().startswith(("%", "!")) else line for line in source.splitlines()
    )

    old_handler = signal.signal(signal.SIGALRM, _alarm_handler)
    signal.setitimer(signal.ITIMER_REAL, cell_timeout if cell_timeout > 0 else 0)
    status = "ok"
    try:
        with redirect_stdout(stdout_buf), redirect_stderr(stderr_buf):
            tree = ast.parse(cleaned)
            result = None
            if tree.body and isinstance(tree.body[-1], ast.Expr):
                head = ast.Module(body=tree.body[:-1], type_ignores=[])
                exec(compile(head, "<cell>", "exec"), namespace)
                result = eval(compile(ast.Expression(tree.body[-1].value), "<cell>", "eval"), namespace)
            else:
                exec(compile(tree, "<cell>", "exec"), namespace)
    except BaseException as exc:  # notebook errors are data
        status = "error"
        ename = type(exc).__name__
        error = {
            "ename": ename,
            "evalue": str(exc),
            "traceback": traceback.format_exc(),
        }
        result = None
    finally:
        signal.setitimer(signal.ITIMER_REAL, 0)
        signal.signal(signal.SIGALRM, old_handler)

    text = stdout_buf.getvalue()
    if text:
        outputs.append({"output_type": "stream", "name": "stdout", "text": text})
    err_text = stderr_buf.getvalue()
    if err_text:
        outputs.append({"output_type": "stream", "name": "stderr", "text": err_text})
    if status == "ok" and result is not None:
        outputs.append({
            "output_type": "execute_result",
            "data": {"text/plain": repr(result)},
            "execution_count": None,
            "metadata": {},
        })
    if status == "error":
        outputs.append({
            "output_type": "error",
            "ename": error["ename"],
            "evalue": error["evalue"],
            "traceback": error["traceback"].splitlines(),
        })
    return status, outputs, error


def execute(notebook_path: Path, record_path: Path, cell_timeout: float, workdir: Path) -> int:
    doc = json.loads(notebook_path.read_text(encoding="utf-8"))
    cells = doc.get("cells", [])
    namespace: dict = {"__name__": "__main__"}
    record_cells = []
    failed = False
    os.chdir(workdir)
    # kernels resolve imports relative to their working directory
    if "" not in sys.path:
        sys.path.insert(0, "")
    for index, cell in enumerate(cells):
        if cell.get("cell_type") != "code":
            continue
        source = cell.get("source", "")
        if isinstance(source, list):
            source = "".join(source)
        if failed:
            record_cells.append({"index": index, "status": "skipped", "duration_s": 0.0, "outputs": []})
            continue
        started = time.monotonic()
        status, outputs, error = run_cell(source, namespace, cell_timeout)
        entry = {
            "index": index,
            "status": status,
            "duration_s": time.monotonic() - started,
            "outputs": outputs,
        }
        entry.update(error)
        record_cells.append(entry)
        if status == "error":
            failed = True

    record = {
        "schema_version": SCHEMA_VERSION,
        "notebook": str(notebook_path),
        "interpreter": ".".join(str(v) for v in sys.version_info[:3]),
        "cells": record_cells,
    }
    try:
        record_path.write_text(json.dumps(record, indent=1), encoding="utf-8")
    except OSError as exc:
        print(f"cannot write record: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--notebook", required=True, type=Path)
    parser.add_argument("--output-record", required=True, type=Path)
    parser.add_argument("--cell-timeout", type=float, default=0)
    parser.add_argument("--workdir", type=Path, default=Path("."))
    args = parser.parse_args(argv)
    return execute(args.notebook, args.output_record, args.cell_timeout, args.workdir)


if __name__ == "__main__":
    sys.exit(main())
