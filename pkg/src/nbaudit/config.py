"""Run configuration: an INI file plus mirroring command-line overrides.

Exactly one input mode must be chosen (a live search query, a file of
article ids, or a directory of article XML).  The only secret, the hosting
API token, comes from the environment (NBAUDIT_API_TOKEN), never from the
file or the command line.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

API_TOKEN_ENV = "NBAUDIT_API_TOKEN"


class ConfigError(Exception):
    pass


@dataclass
class PipelineConfig:
    # input: exactly one of the three
    query: str | None = None
    id_list: Path | None = None
    xml_dir: Path | None = None

    workspace: Path = Path("workspace")
    db_path: Path | None = None      # default: <workspace>/corpus.sqlite
    reports_dir: Path | None = None  # default: <workspace>/reports

    attempt_policy: str = "declared_only"  # declared_only | all
    default_interpreter: str = "3.7"
    api_delay_s: float = 0.35
    execute_throttle_s: float = 0.0
    offline: bool = False

    clone_template: str = "git clone --depth 1 --single-branch {url} {dest}"
    manager_command: str = "conda"
    executor_command: str = "python3 -m nbaudit.mock_executor"

    notebook_timeout_s: float = 3600.0
    cell_timeout_s: float = 600.0
    output_cap_bytes: int = 10 * 1024 * 1024

    extra_env: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        modes = [m for m in (self.query, self.id_list, self.xml_dir) if m is not None]
        if len(modes) != 1:
            raise ConfigError("exactly one input mode required: query, id_list or xml_dir")
        if self.attempt_policy not in ("declared_only", "all"):
            raise ConfigError(f"unknown attempt_policy: {self.attempt_policy!r}")
        for name in ("workspace", "db_path", "reports_dir", "id_list", "xml_dir"):
            value = getattr(self, name)
            if value is not None and not isinstance(value, Path):
                setattr(self, name, Path(value))
        if self.db_path is None:
            self.db_path = self.workspace / "corpus.sqlite"
        if self.reports_dir is None:
            self.reports_dir = self.workspace / "reports"
        for name in ("api_delay_s", "execute_throttle_s", "notebook_timeout_s", "cell_timeout_s"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if self.notebook_timeout_s <= 0 or self.cell_timeout_s <= 0:
            raise ConfigError("timeouts must be positive")

    @property
    def api_token(self) -> str | None:
        return os.environ.get(API_TOKEN_ENV)


_SECTION_OF = {
    "query": "input", "id_list": "input", "xml_dir": "input",
    "workspace": "pipeline", "db_path": "pipeline", "reports_dir": "pipeline",
    "attempt_policy": "pipeline", "default_interpreter": "pipeline",
    "api_delay_s": "pipeline", "execute_throttle_s": "pipeline", "offline": "pipeline",
    "clone_template": "tools", "manager_command": "tools", "executor_command": "tools",
    "notebook_timeout_s": "limits", "cell_timeout_s": "limits",
    "output_cap_bytes": "limits",
}

_FLOATS = {"api_delay_s", "execute_throttle_s", "notebook_timeout_s", "cell_timeout_s"}
_INTS = {"output_cap_bytes"}
_BOOLS = {"offline"}
_PATHS = {"id_list", "xml_dir", "workspace", "db_path", "reports_dir"}


def load_config(path: Path | None = None, overrides: dict | None = None) -> PipelineConfig:
    """Build a config from an optional INI file plus explicit overrides.

    Overrides (typically parsed CLI flags) win over the file; None override
    values are ignored.
    """
    values: dict = {}
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"cannot read config file: {path}")
        for name, section in _SECTION_OF.items():
            if parser.has_option(section, name):
                values[name] = parser.get(section, name)
    for name, value in (overrides or {}).items():
        if value is not None:
            values[name] = value

    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown settings: {', '.join(sorted(unknown))}")
    for name in list(values):
        raw = values[name]
        if isinstance(raw, str):
            try:
                if name in _FLOATS:
                    values[name] = float(raw)
                elif name in _INTS:
                    values[name] = int(raw)
                elif name in _BOOLS:
                    values[name] = raw.strip().lower() in ("1", "true", "yes", "on")
            except ValueError as exc:
                raise ConfigError(f"bad value for {name}: {raw!r}") from exc
        if name in _PATHS and values[name] is not None:
            values[name] = Path(values[name])
    return PipelineConfig(**values)
