"""Comparing re-executed outputs against stored ones, and the outcome funnel.

Output normalization before comparison: execution counters are dropped,
consecutive same-stream outputs are merged into one text block, rich
payloads are compared per media type on decoded bytes, and output metadata
is ignored.  No fuzzy matching by default; an optional scrub list for
volatile substrings (object addresses, timestamps) exists but is off unless
requested.
"""

from __future__ import annotations

import base64
import re
from dataclasses import dataclass, field

from .inventory import CellRecord, OutputBundle

TEXT_MEDIA_PREFIXES = ("text/", "application/json")

SCRUB_PATTERNS = {
    "hex_addresses": re.compile(r"0x[0-9a-fA-F]{6,16}"),
    "iso_timestamps": re.compile(r"\d{4}-\d{2}-\d{2}[T ]\d{2}:\d{2}:\d{2}(?:\.\d+)?(?:Z|[+-]\d{2}:?\d{2})?"),
}


@dataclass
class DiffEntry:
    cell_index: int
    kind: str  # missing_output | extra_output | changed_output
    media_type: str
    summary: str


@dataclass
class DiffResult:
    notebook_id: str
    verdict: str  # identical | different
    diff_count: int
    diffs: list[DiffEntry] = field(default_factory=list)


@dataclass
class ComparePolicy:
    scrub: tuple[str, ...] = ()  # names from SCRUB_PATTERNS


def _scrub(text: str, policy: ComparePolicy) -> str:
    for name in policy.scrub:
        text = SCRUB_PATTERNS[name].sub(f"<{name}>", text)
    return text


def _as_dict(output) -> dict:
    if isinstance(output, OutputBundle):
        doc = {"output_type": output.output_type}
        if output.output_type == "stream":
            doc["name"] = output.name or "stdout"
            doc["text"] = output.text or ""
        elif output.output_type in ("error", "pyerr"):
            doc["ename"] = output.ename
            doc["evalue"] = output.evalue
        else:
            doc["data"] = dict(output.data)
        return doc
    return output


def _decode_payload(media: str, value) -> bytes:
    if isinstance(value, list):
        value = "".join(str(v) for v in value)
    if isinstance(value, str):
        if media.startswith(TEXT_MEDIA_PREFIXES):
            return value.encode("utf-8")
        try:
            # serialized payloads wrap base64 with newlines
            return base64.b64decode("".join(value.split()), validate=True)
        except Exception:
            return value.encode("utf-8")
    return repr(value).encode("utf-8")


def _normalize(outputs, policy: ComparePolicy) -> list[tuple]:
    """Canonical comparable forms; consecutive same-stream outputs merge."""
    canon: list[tuple] = []
    for output in outputs:
        doc = _as_dict(output)
        output_type = doc.get("output_type", "unknown")
        if output_type == "stream":
            name = doc.get("name") or doc.get("stream") or "stdout"
            text = doc.get("text", "")
            if isinstance(text, list):
                text = "".join(text)
            text = _scrub(text, policy)
            if canon and canon[-1][0] == "stream" and canon[-1][1] == name:
                canon[-1] = ("stream", name, canon[-1][2] + text)
            else:
                canon.append(("stream", name, text))
        elif output_type in ("error", "pyerr"):
            canon.append(("error", doc.get("ename")))
        else:
            if output_type == "pyout":
                output_type = "execute_result"
            data = doc.get("data") or {}
            payload = tuple(sorted(
                (media, _scrub(_decode_payload(media, value).decode("utf-8", "replace"), policy).encode())
                if media.startswith(TEXT_MEDIA_PREFIXES)
                else (media, _decode_payload(media, value))
                for media, value in data.items()
            ))
            canon.append(("rich", output_type, payload))
    return canon


def _media_of(entry: tuple) -> str:
    if entry[0] == "stream":
        return f"stream/{entry[1]}"
    if entry[0] == "error":
        return "error"
    return entry[2][0][0] if entry[2] else entry[1]


def _summary_of(entry: tuple) -> str:
    if entry[0] == "stream":
        return entry[2][:80]
    if entry[0] == "error":
        return str(entry[1])
    return ", ".join(m for m, _ in entry[2])[:80]


def compare(original_cells: list[CellRecord], executed_cells, notebook_id: str = "",
            policy: ComparePolicy | None = None) -> DiffResult:
    """Compare stored against re-executed outputs per code cell.

    ``executed_cells`` maps cell index to the executed output list
    (nbformat-shaped dicts).  Markdown/raw cells never contribute.
    """
    policy = policy or ComparePolicy()
    diffs: list[DiffEntry] = []
    for cell in original_cells:
        if cell.kind != "code":
            continue
        stored = _normalize(cell.outputs, policy)
        executed = _normalize(executed_cells.get(cell.index, []), policy)
        for position in range(max(len(stored), len(executed))):
            if position >= len(executed):
                entry = stored[position]
                diffs.append(DiffEntry(cell.index, "missing_output", _media_of(entry), _summary_of(entry)))
            elif position >= len(stored):
                entry = executed[position]
                diffs.append(DiffEntry(cell.index, "extra_output", _media_of(entry), _summary_of(entry)))
            elif stored[position] != executed[position]:
                entry = stored[position]
                diffs.append(DiffEntry(cell.index, "changed_output", _media_of(entry), _summary_of(entry)))
    verdict = "identical" if not diffs else "different"
    return DiffResult(notebook_id, verdict, len(diffs), diffs)


# ---------------------------------------------------------------------------
# Outcome classification
# ---------------------------------------------------------------------------

REPO_OUTCOMES = ("gone_repo", "no_notebooks")
NOTEBOOK_OUTCOMES = (
    "invalid_notebook", "non_python", "not_attempted", "install_failed",
    "exception", "timeout", "infrastructure_error",
    "success_different", "success_identical",
)


class InconsistentFunnelState(Exception):
    """Stage data contradicts itself: a pipeline bug, not notebook data."""


@dataclass
class FunnelState:
    """Everything known about one notebook's journey through the stages."""

    valid: bool = True
    invalid_reason: str | None = None
    language: str = "python"
    attempted: bool = True
    provision_status: str | None = None  # ready | install_failed
    execution_status: str | None = None  # completed | exception | timeout | infrastructure_error
    exception_bucket: str | None = None
    diff_count: int | None = None


def classify_outcome(state: FunnelState) -> str:
    """Earliest-failing-stage wins; the result partitions every notebook."""
    if not state.valid:
        return "invalid_notebook"
    if state.language != "python":
        return "non_python"
    if not state.attempted:
        return "not_attempted"
    if state.provision_status is None:
        raise InconsistentFunnelState("attempted notebook without provision result")
    if state.provision_status == "install_failed":
        return "install_failed"
    if state.provision_status != "ready":
        raise InconsistentFunnelState(f"bad provision status {state.provision_status!r}")
    if state.execution_status is None:
        raise InconsistentFunnelState("provisioned notebook without execution record")
    if state.execution_status == "exception":
        bucket = state.exception_bucket or "unknown"
        return f"exception({bucket})"
    if state.execution_status in ("timeout", "infrastructure_error"):
        return state.execution_status
    if state.execution_status != "completed":
        raise InconsistentFunnelState(f"bad execution status {state.execution_status!r}")
    if state.diff_count is None:
        raise InconsistentFunnelState("completed execution without diff result")
    return "success_identical" if state.diff_count == 0 else "success_different"
