"""End-to-end: real virtualenv manager + shim over a small corpus.

Covers the executor command contract from the consumer side: the harness
launches the shim inside a freshly provisioned environment and the
resulting records classify into the expected outcomes.
"""

import json
import os
import subprocess
import sys
import time
from pathlib import Path

import pytest

from conftest import SHIM_SRC

from nbaudit.diffing import compare
from nbaudit.harness import ExecutionLimits, classify_exception, execute_notebook
from nbaudit.inventory import parse_notebook_cells


def _notebook(cells):
    return {
        "nbformat": 4, "nbformat_minor": 5,
        "metadata": {"language_info": {"name": "python"}},
        "cells": cells,
    }


def _code(source, outputs=()):
    return {"cell_type": "code", "source": source, "metadata": {},
            "execution_count": None, "outputs": list(outputs)}


@pytest.fixture(scope="module")
def env_python(tmp_path_factory):
    """A real virtualenv provisioned through the manager CLI contract."""
    root = tmp_path_factory.mktemp("envs")
    env = {**os.environ, "NBAUDIT_VENV_ROOT": str(root)}
    # defer to the system-wide pip index; the session-scoped one is restricted
    env.pop("PIP_INDEX_URL", None)
    create = subprocess.run(
        [sys.executable, "-m", "nbaudit.venv_manager",
         "create", "--name", "shimtest", "python=3.10"],
        capture_output=True, text=True, env=env)
    assert create.returncode == 0, create.stderr
    install = subprocess.run(
        [sys.executable, "-m", "nbaudit.venv_manager",
         "install", "--name", "shimtest", "six"],
        capture_output=True, text=True, env=env)
    assert install.returncode == 0, install.stderr
    return root / "shimtest" / "bin" / "python"


def _run(env_python, nb_path, record_path, limits):
    return execute_notebook(
        nb_path, nb_path.stem, "shimtest",
        str(env_python) + " -m exec_shim",
        limits, record_path,
        extra_env={"PYTHONPATH": str(SHIM_SRC)},
    )


def test_live_mini_corpus_outcomes(env_python, tmp_path):
    started = time.monotonic()
    limits = ExecutionLimits(notebook_timeout_s=120, cell_timeout_s=60)

    clean = tmp_path / "clean.ipynb"
    clean.write_text(json.dumps(_notebook([
        _code("import six\nprint(six.__name__)",
              outputs=[{"output_type": "stream", "name": "stdout", "text": "six\n"}]),
    ])))
    missing_module = tmp_path / "missing_module.ipynb"
    missing_module.write_text(json.dumps(_notebook([
        _code("import definitely_absent_module_xyz"),
    ])))
    missing_file = tmp_path / "missing_file.ipynb"
    missing_file.write_text(json.dumps(_notebook([
        _code("open('no/such/file.txt')"),
    ])))

    outcomes = set()
    for nb_path in (clean, missing_module, missing_file):
        record = _run(env_python, nb_path, tmp_path / (nb_path.stem + ".json"), limits)
        if record.status == "exception":
            outcomes.add("exception(%s)" % classify_exception(record))
        else:
            assert record.status == "completed", record.detail
            _, cells = parse_notebook_cells(nb_path)
            executed = {c.index: c.outputs for c in record.cell_results}
            verdict = compare(cells, executed, nb_path.stem).verdict
            outcomes.add("success_%s" % verdict)

    assert outcomes == {"success_identical",
                        "exception(ModuleNotFoundError)",
                        "exception(FileNotFoundError)"}
    elapsed = time.monotonic() - started
    assert elapsed < 600
    print("\nACCEPTANCE live-shim mini-corpus: PASS (%s, %.1fs)"
          % (", ".join(sorted(outcomes)), elapsed))


def test_live_timeout_kills_process_tree(env_python, tmp_path):
    source = (
        "import subprocess, sys, os, time\n"
        "child = subprocess.Popen([sys.executable, '-c',\n"
        "    \"import time, os; open('child.pid', 'w').write(str(os.getpid())); \"\n"
        "    \"time.sleep(300)\"])\n"
        "time.sleep(300)\n"
    )
    nb_path = tmp_path / "sleeper.ipynb"
    nb_path.write_text(json.dumps(_notebook([_code(source)])))
    limits = ExecutionLimits(notebook_timeout_s=4, cell_timeout_s=300)
    record = _run(env_python, nb_path, tmp_path / "sleeper.json", limits)
    assert record.status == "timeout"

    pid_file = tmp_path / "child.pid"
    assert pid_file.exists(), "child never started; probe is meaningless"
    child_pid = int(pid_file.read_text())
    # gone entirely, or a zombie awaiting reaping by init: either way it no
    # longer runs; poll briefly to absorb kill latency
    deadline = time.monotonic() + 5
    while time.monotonic() < deadline:
        try:
            with open("/proc/%d/stat" % child_pid) as fh:
                state = fh.read().rsplit(")", 1)[1].split()[0]
        except FileNotFoundError:
            state = "gone"
        if state in ("gone", "Z"):
            break
        time.sleep(0.05)
    assert state in ("gone", "Z"), "child %d still alive (%s)" % (child_pid, state)
    print("\nACCEPTANCE live-shim timeout kill: PASS (child %d %s)" % (child_pid, state))
