import json
import sys
from pathlib import Path

SHIM_SRC = Path(__file__).resolve().parent.parent / "src"
if str(SHIM_SRC) not in sys.path:
    sys.path.insert(0, str(SHIM_SRC))


def write_notebook(path: Path, cells, version=4):
    """Write a minimal notebook document; cells = list of (cell_type, source)."""
    body = [
        {"cell_type": kind, "source": source, "metadata": {},
         **({"execution_count": None, "outputs": []} if kind == "code" else {})}
        for kind, source in cells
    ]
    doc = {
        "nbformat": version, "nbformat_minor": 5,
        "metadata": {"language_info": {"name": "python"}},
        "cells": body,
    }
    path.write_text(json.dumps(doc))
    return path
