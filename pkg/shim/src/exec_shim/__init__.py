"""In-environment notebook executor.

Runs a notebook's code cells once, top to bottom, against the interpreter
it is invoked with, and writes a structured record of per-cell status,
outputs and timings.  Designed to be launched inside a provisioned
environment by an external harness; depends on the standard library only
so it never perturbs the environment under test.
"""

from exec_shim.runner import SCHEMA_VERSION, execute, main

__all__ = ["SCHEMA_VERSION", "execute", "main"]
