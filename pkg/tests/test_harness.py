"""Executor harness: record parsing, limits and process-tree cleanup."""

import json
import os
import signal
import textwrap
import time
from pathlib import Path

import pytest

from nbaudit.harness import (
    CellResult,
    ExecutionLimits,
    ExecutionRecord,
    RecordFormatError,
    classify_exception,
    execute_notebook,
    parse_record_file,
)

MOCK_EXECUTOR = "python3 -m nbaudit.mock_executor"


def write_nb(tmp_path, sources, name="nb.ipynb"):
    doc = {
        "nbformat": 4, "nbformat_minor": 5,
        "metadata": {"language_info": {"name": "python", "version": "3.10"}},
        "cells": [{"cell_type": "code", "source": s, "metadata": {},
                   "execution_count": None, "outputs": []} for s in sources],
    }
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def run(tmp_path, sources, limits=None, executor=MOCK_EXECUTOR):
    nb = write_nb(tmp_path, sources)
    return execute_notebook(
        nb, "nb", "env", executor, limits or ExecutionLimits(notebook_timeout_s=30),
        tmp_path / "record.json",
    )


# ---------------------------------------------------------------------------
# record file parsing
# ---------------------------------------------------------------------------

def record_doc(cells):
    return {"schema_version": 1, "notebook": "n", "interpreter": "3.10.12", "cells": cells}


def write_record(tmp_path, doc):
    path = tmp_path / "r.json"
    path.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return path


def test_parse_record_roundtrip(tmp_path):
    doc = record_doc([
        {"index": 0, "status": "ok", "duration_s": 0.1, "outputs": []},
        {"index": 2, "status": "error", "duration_s": 0.0, "outputs": [],
         "ename": "ValueError", "evalue": "x", "traceback": "tb"},
    ])
    assert parse_record_file(write_record(tmp_path, doc)) == doc


@pytest.mark.parametrize("mutate,message", [
    (lambda d: d.update(schema_version=2), "schema_version"),
    (lambda d: d.update(cells=None), "cells"),
    (lambda d: d["cells"].append({"index": 0, "status": "ok", "outputs": []}), "strictly increasing"),
    (lambda d: d["cells"].append({"index": 5, "status": "maybe", "outputs": []}), "status"),
    (lambda d: d["cells"].append({"index": 5, "status": "ok", "outputs": {}}), "outputs"),
])
def test_parse_record_rejections(tmp_path, mutate, message):
    doc = record_doc([{"index": 1, "status": "ok", "outputs": []}])
    mutate(doc)
    with pytest.raises(RecordFormatError) as err:
        parse_record_file(write_record(tmp_path, doc))
    assert message in str(err.value)


def test_parse_record_unreadable(tmp_path):
    with pytest.raises(RecordFormatError):
        parse_record_file(write_record(tmp_path, "{broken"))
    with pytest.raises(RecordFormatError):
        parse_record_file(tmp_path / "absent.json")


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------

def test_completed_run_collects_outputs(tmp_path):
    record = run(tmp_path, ["print('hi')", "1 + 1"])
    assert record.status == "completed"
    assert [c.status for c in record.cell_results] == ["ok", "ok"]
    assert record.cell_results[0].outputs[0]["text"] == "hi\n"
    assert record.cell_results[1].outputs[0]["data"]["text/plain"] == "2"
    assert record.first_exception is None


def test_error_stops_and_skips_rest(tmp_path):
    record = run(tmp_path, ["x = 1", "raise ValueError('boom')", "print('never')"])
    assert record.status == "exception"
    assert [c.status for c in record.cell_results] == ["ok", "error", "skipped"]
    ename, evalue, _, index = record.first_exception
    assert (ename, evalue, index) == ("ValueError", "boom", 1)
    assert classify_exception(record) == "ValueError"


def test_nonzero_exit_is_infrastructure(tmp_path):
    record = run(tmp_path, ["import os\nos._exit(7)"])
    assert record.status == "infrastructure_error"


def test_executor_without_record_is_infrastructure(tmp_path):
    record = run(tmp_path, ["x = 1"], executor="python3 -c 'import sys; sys.exit(0)' --ignore")
    assert record.status == "infrastructure_error"


def test_output_flood_capped(tmp_path):
    limits = ExecutionLimits(notebook_timeout_s=30, output_cap_bytes=1000)
    record = run(tmp_path, ["print('x' * 5000)"], limits)
    assert record.status == "infrastructure_error"
    assert "output flood" in record.detail


def test_timeout_kills_whole_process_tree(tmp_path):
    # the cell spawns a child that would outlive a naive kill
    source = textwrap.dedent("""
        import subprocess, sys, time
        child = subprocess.Popen([sys.executable, "-c", "import time; time.sleep(60)"])
        open("child.pid", "w").write(str(child.pid))
        time.sleep(60)
    """)
    limits = ExecutionLimits(notebook_timeout_s=2, cell_timeout_s=30)
    started = time.monotonic()
    record = run(tmp_path, [source], limits)
    assert record.status == "timeout"
    assert time.monotonic() - started < 15
    pid = int((tmp_path / "child.pid").read_text())
    # give the kill a moment, then the child must be gone
    for _ in range(20):
        try:
            os.kill(pid, 0)
        except ProcessLookupError:
            break
        time.sleep(0.1)
    else:
        os.kill(pid, signal.SIGKILL)
        pytest.fail("child process survived the timeout kill")


def test_classify_exception_buckets():
    def record(ename):
        return ExecutionRecord("nb", "env", "exception",
                               first_exception=(ename, "", "", 0))
    assert classify_exception(record("ModuleNotFoundError")) == "ModuleNotFoundError"
    assert classify_exception(record("HTTPError")) == "HTTPError"
    assert classify_exception(record("SomethingElse")) == "other(SomethingElse)"
    assert classify_exception(record("")) == "unknown"
    assert classify_exception(ExecutionRecord("nb", "env", "exception")) == "unknown"
    with pytest.raises(ValueError):
        classify_exception(ExecutionRecord("nb", "env", "completed"))


def test_cell_timeout_becomes_exception(tmp_path):
    limits = ExecutionLimits(notebook_timeout_s=30, cell_timeout_s=1)
    record = run(tmp_path, ["import time\ntime.sleep(10)", "print('after')"], limits)
    assert record.status == "exception"
    assert record.first_exception[0] == "CellTimeoutError"
    assert [c.status for c in record.cell_results] == ["error", "skipped"]
