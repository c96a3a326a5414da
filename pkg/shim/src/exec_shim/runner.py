"""Execute a notebook's code cells sequentially and write a record file.

Command contract:

    <python> -m exec_shim --notebook N --output-record R
                          --cell-timeout S --workdir D

Exit code 0 means the record was written; notebook errors are data inside
the record, not process failures.  A nonzero exit means no usable record
exists (the harness treats that as an infrastructure error).
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

SCHEMA_VERSION = 1


class CellTimeoutError(Exception):
    """Raised inside a cell when its wall-clock budget is exhausted."""


def _alarm(signum, frame):
    raise CellTimeoutError("cell timeout")


def _as_source(value) -> str:
    if isinstance(value, list):
        return "".join(str(v) for v in value)
    return str(value or "")


def _code_cells(doc: dict):
    """Yield (index, source) over code cells; handles v4 and v3 layouts.

    Indices count all cells so they line up with the stored notebook.
    """
    cells = doc.get("cells")
    if cells is None:
        cells = []
        for sheet in doc.get("worksheets") or []:
            cells.extend(sheet.get("cells") or [])
    for index, cell in enumerate(cells):
        if cell.get("cell_type") == "code":
            # v3 stores code under "input"
            source = cell.get("source", cell.get("input", ""))
            yield index, _as_source(source)


def run_cell(source: str, namespace: dict, cell_timeout: float):
    """Execute one cell; returns (status, outputs, error fields).

    The last statement, when it is a bare expression, is evaluated and its
    repr recorded as an execute_result, mirroring kernel display semantics.
    Front-end magics and shell escapes are blanked: this executor runs on a
    plain interpreter, and those lines are environment plumbing rather than
    the computation under audit.
    """
    outputs = []
    error = {}
    stdout_buf, stderr_buf = io.StringIO(), io.StringIO()
    cleaned = "\n".join(
        "" if line.lstrip().startswith(("%", "!")) else line
        for line in source.splitlines()
    )

    old = signal.signal(signal.SIGALRM, _alarm)
    signal.setitimer(signal.ITIMER_REAL, cell_timeout if cell_timeout > 0 else 0)
    status = "ok"
    result = None
    try:
        with redirect_stdout(stdout_buf), redirect_stderr(stderr_buf):
            tree = ast.parse(cleaned)
            if tree.body and isinstance(tree.body[-1], ast.Expr):
                head = ast.Module(body=tree.body[:-1], type_ignores=[])
                exec(compile(head, "<cell>", "exec"), namespace)
                tail = ast.Expression(tree.body[-1].value)
                result = eval(compile(tail, "<cell>", "eval"), namespace)
            else:
                exec(compile(tree, "<cell>", "exec"), namespace)
    except BaseException as exc:
        status = "error"
        error = {
            "ename": type(exc).__name__,
            "evalue": str(exc),
            "traceback": traceback.format_exc(),
        }
        result = None
    finally:
        signal.setitimer(signal.ITIMER_REAL, 0)
        signal.signal(signal.SIGALRM, old)

    text = stdout_buf.getvalue()
    if text:
        outputs.append({"output_type": "stream", "name": "stdout", "text": text})
    text = stderr_buf.getvalue()
    if text:
        outputs.append({"output_type": "stream", "name": "stderr", "text": text})
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


def execute(notebook_path, record_path, cell_timeout, workdir) -> int:
    try:
        with open(notebook_path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, ValueError) as exc:
        print("cannot read notebook: %s" % exc, file=sys.stderr)
        return 1

    os.chdir(workdir)
    # a kernel resolves imports relative to the notebook's directory
    if "" not in sys.path:
        sys.path.insert(0, "")

    namespace = {"__name__": "__main__"}
    record_cells = []
    failed = False
    for index, source in _code_cells(doc):
        if failed:
            record_cells.append(
                {"index": index, "status": "skipped", "duration_s": 0.0, "outputs": []})
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
        with open(record_path, "w", encoding="utf-8") as fh:
            json.dump(record, fh, indent=1)
    except OSError as exc:
        print("cannot write record: %s" % exc, file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="exec-shim", description=__doc__)
    parser.add_argument("--notebook", required=True)
    parser.add_argument("--output-record", required=True)
    parser.add_argument("--cell-timeout", type=float, default=0)
    parser.add_argument("--workdir", default=".")
    args = parser.parse_args(argv)
    return execute(args.notebook, args.output_record, args.cell_timeout, args.workdir)
