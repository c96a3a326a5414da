"""venv-backed environment manager honoring the manager adapter contract.

A drop-in for conda-style managers in installations without one:

    python3 -m nbaudit.venv_manager create --name ID python=VER
    python3 -m nbaudit.venv_manager install --name ID PKG...

Environments are real virtualenvs under NBAUDIT_VENV_ROOT (default ./envs).
Only the running interpreter is available, so a requested version that does
not match it is honored with a warning rather than a failure; the observed
in-environment version is what execution records report.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import venv
from pathlib import Path


def _env_python(env_dir: Path) -> Path:
    return env_dir / "bin" / "python"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser()
    sub = parser.add_subparsers(dest="command", required=True)
    create = sub.add_parser("create")
    create.add_argument("--name", required=True)
    create.add_argument("spec")
    install = sub.add_parser("install")
    install.add_argument("--name", required=True)
    install.add_argument("packages", nargs="+")
    args = parser.parse_args(argv)

    root = Path(os.environ.get("NBAUDIT_VENV_ROOT", "envs"))
    env_dir = root / args.name

    if args.command == "create":
        requested = args.spec.partition("=")[2]
        running = ".".join(str(v) for v in sys.version_info[:2])
        if requested and requested not in (running, ".".join(str(v) for v in sys.version_info[:3])):
            print(f"warning: requested python={requested}, providing {running}", file=sys.stderr)
        env_dir.parent.mkdir(parents=True, exist_ok=True)
        venv.EnvBuilder(with_pip=True, clear=True).create(env_dir)
        return 0

    python = _env_python(env_dir)
    if not python.exists():
        print(f"no such environment: {args.name}", file=sys.stderr)
        return 1
    proc = subprocess.run(
        [str(python), "-m", "pip", "install", "--quiet", *args.packages],
        capture_output=True, text=True,
    )
    if proc.returncode != 0:
        sys.stderr.write(proc.stderr[-4000:])
        return proc.returncode
    return 0


if __name__ == "__main__":
    sys.exit(main())
