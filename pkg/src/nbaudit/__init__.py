"""nbaudit: audit the computational reproducibility of published Jupyter notebooks.

The pipeline mines repository links from scholarly full-text XML, harvests
the repositories, statically analyzes the notebooks they contain, synthesizes
execution environments, re-executes the notebooks and diffs the results
against the outputs stored in the original files.  Everything is persisted in
a single SQLite store from which aggregate reports are produced.
"""

__version__ = "0.1.0"
