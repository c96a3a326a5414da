"""Command-line entry point.

    nbaudit run   [--config FILE] [overrides...]
    nbaudit stage NAME [NAME...] [--config FILE] [overrides...]

Configuration errors at startup exit with status 2; pipeline failures with 1.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .driver import STAGES, DriverError, PipelineDriver


def _add_overrides(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=Path, default=None, help="INI configuration file")
    parser.add_argument("--query", help="literature search query (input mode)")
    parser.add_argument("--id-list", dest="id_list", type=Path, help="file of article ids (input mode)")
    parser.add_argument("--xml-dir", dest="xml_dir", type=Path, help="directory of article XML (input mode)")
    parser.add_argument("--workspace", type=Path)
    parser.add_argument("--db-path", dest="db_path", type=Path)
    parser.add_argument("--reports-dir", dest="reports_dir", type=Path)
    parser.add_argument("--attempt-policy", dest="attempt_policy", choices=["declared_only", "all"])
    parser.add_argument("--default-interpreter", dest="default_interpreter")
    parser.add_argument("--api-delay-s", dest="api_delay_s", type=float)
    parser.add_argument("--execute-throttle-s", dest="execute_throttle_s", type=float)
    parser.add_argument("--offline", action="store_const", const=True, default=None)
    parser.add_argument("--clone-template", dest="clone_template")
    parser.add_argument("--manager-command", dest="manager_command")
    parser.add_argument("--executor-command", dest="executor_command")
    parser.add_argument("--notebook-timeout-s", dest="notebook_timeout_s", type=float)
    parser.add_argument("--cell-timeout-s", dest="cell_timeout_s", type=float)
    parser.add_argument("--output-cap-bytes", dest="output_cap_bytes", type=int)
    parser.add_argument("--fixture-repos", dest="fixture_repos", type=Path,
                        help="offline mode: directory of fixture working trees")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nbaudit",
                                     description="notebook reproducibility audit pipeline")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run all stages")
    _add_overrides(run)
    stage = sub.add_parser("stage", help="run selected stages")
    stage.add_argument("stages", nargs="+", choices=STAGES)
    _add_overrides(stage)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {
        name: getattr(args, name)
        for name in ("query", "id_list", "xml_dir", "workspace", "db_path", "reports_dir",
                     "attempt_policy", "default_interpreter", "api_delay_s",
                     "execute_throttle_s", "offline", "clone_template", "manager_command",
                     "executor_command", "notebook_timeout_s", "cell_timeout_s",
                     "output_cap_bytes")
        if getattr(args, name, None) is not None
    }
    if getattr(args, "fixture_repos", None) is not None:
        overrides["extra_env"] = {"NBAUDIT_FIXTURE_REPOS": str(args.fixture_repos)}
    try:
        config = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        driver = PipelineDriver(config)
    except DriverError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        driver.run(args.stages if args.command == "stage" else None)
    except DriverError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return 1
    finally:
        driver.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
