"""Offline clone tool honoring the version-control command contract.

    python3 -m nbaudit.mock_git clone --depth 1 --single-branch <url> <dest>

Resolves the repository URL against a fixture directory (env var
NBAUDIT_FIXTURE_REPOS) laid out as <owner>__<repo>/ working trees and copies
the tree to the destination.  Exit 0 on success, like the real tool.
"""

from __future__ import annotations

import argparse
import os
import shutil
import sys
from pathlib import Path
from urllib.parse import urlsplit


def main(argv=None) -> int:
    parser = argparse.ArgumentParser()
    sub = parser.add_subparsers(dest="command", required=True)
    clone = sub.add_parser("clone")
    clone.add_argument("--depth", type=int, default=None)
    clone.add_argument("--single-branch", action="store_true")
    clone.add_argument("url")
    clone.add_argument("dest")
    args = parser.parse_args(argv)

    root = os.environ.get("NBAUDIT_FIXTURE_REPOS")
    if not root:
        print("NBAUDIT_FIXTURE_REPOS not set", file=sys.stderr)
        return 2
    parts = [s for s in urlsplit(args.url).path.split("/") if s]
    if len(parts) < 2:
        print(f"bad repository url: {args.url}", file=sys.stderr)
        return 1
    source = Path(root) / f"{parts[0]}__{parts[1]}"
    if not source.exists():
        print(f"fatal: repository '{args.url}' not found", file=sys.stderr)
        return 128
    if not any(source.iterdir()):
        print("warning: You appear to have cloned an empty repository.", file=sys.stderr)
        return 1
    shutil.copytree(source, args.dest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
