"""Mock environment manager honoring the manager adapter command contract.

Used by offline runs and tests: environments are directories with marker
files, installs succeed unless a package name matches the deny pattern
(default: anything containing "definitely-not-a-real").

Usage: python3 -m nbaudit.mock_manager create --name ID python=VER
       python3 -m nbaudit.mock_manager install --name ID PKG...

Environment root comes from NBAUDIT_MOCK_ENV_ROOT (default: ./mock-envs);
deny pattern from NBAUDIT_MOCK_DENY (substring match).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser()
    sub = parser.add_subparsers(dest="command", required=True)
    create = sub.add_parser("create")
    create.add_argument("--name", required=True)
    create.add_argument("spec")  # python=VER
    install = sub.add_parser("install")
    install.add_argument("--name", required=True)
    install.add_argument("packages", nargs="+")
    args = parser.parse_args(argv)

    root = Path(os.environ.get("NBAUDIT_MOCK_ENV_ROOT", "mock-envs"))
    deny = os.environ.get("NBAUDIT_MOCK_DENY", "definitely-not-a-real")

    env_dir = root / args.name
    if args.command == "create":
        env_dir.mkdir(parents=True, exist_ok=True)
        (env_dir / "python-version").write_text(args.spec.partition("=")[2] + "\n")
        return 0

    if not env_dir.exists():
        print(f"no such environment: {args.name}", file=sys.stderr)
        return 1
    for package in args.packages:
        if deny and deny in package:
            print(f"PackagesNotFoundError: the following packages are not available: {package}",
                  file=sys.stderr)
            return 1
        with open(env_dir / "installed.txt", "a") as fh:
            fh.write(package + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
