"""Code-style findings for notebook code cells.

Cells are concatenated in order into one virtual module (mirroring how
notebook linting front-ends feed flake8-style engines) with cell boundaries
recorded, and checked against a fixed subset of style codes.  Magic and
shell-escape lines are skipped.  Findings are ordered by (cell, line, column)
with columns 1-based.
"""

from __future__ import annotations

import io
import keyword
import re
import tokenize
from dataclasses import dataclass

DESCRIPTIONS = {
    "E225": "missing whitespace around operator",
    "E231": "missing whitespace after commas, semicolons or colons",
    "E262": "inline comment should start with '#'",
    "E265": "block comment should start with '#'",
    "E401": "multiple imports on one line",
    "E402": "module level import not at top of file",
    "E701": "multiple statements on one line",
    "E703": "statement ends with a semicolon",
    "E741": "do not use variables named 'l', 'O', or 'I'",
    "F401": "module imported but unused",
    "F403": "'from module import *' used; unable to detect undefined names",
}

_MAGIC_OR_SHELL_RE = re.compile(r"^\s*[%!]")

# E225 scope: assignment, comparison, arrow and walrus operators.  Arithmetic,
# bitwise and modulo spacing fall under codes outside the implemented subset.
_E225_OPERATORS = {
    "=", "==", "!=", "<", ">", "<=", ">=", "->", ":=",
    "+=", "-=", "*=", "/=", "//=", "%=", "**=", "&=", "|=", "^=", ">>=", "<<=", "@=",
}

# One-line ``def`` bodies carry a different code outside the subset, so they
# are not flagged here.
_COMPOUND_KEYWORDS = {"if", "elif", "else", "for", "while", "try", "except", "finally", "with", "class"}

# Statement-leading keywords that do not count as "code before imports".
_E402_NEUTRAL = {"if", "elif", "else", "try", "except", "finally", "with"}

_IDENTS_TO_AVOID = {"l", "O", "I"}


@dataclass(frozen=True)
class StyleFinding:
    notebook_id: str
    cell_index: int
    line: int  # 1-based within the cell
    column: int  # 1-based
    code: str
    description: str


def _concatenate(cell_sources: list[str]) -> tuple[str, list[tuple[int, int]]]:
    """Join code cells; return source and a map from global line to (cell, line)."""
    lines: list[str] = []
    line_map: list[tuple[int, int]] = []
    for cell_index, source in enumerate(cell_sources):
        for cell_line, line in enumerate(source.splitlines() or [""], start=1):
            if _MAGIC_OR_SHELL_RE.match(line):
                line = ""
            lines.append(line)
            line_map.append((cell_index, cell_line))
    return "\n".join(lines) + "\n", line_map


def style_check(cell_sources: list[str], notebook_id: str = "") -> list[StyleFinding]:
    source, line_map = _concatenate(cell_sources)
    raw: list[tuple[int, int, str]] = []  # (global line, col, code)

    try:
        tokens = list(tokenize.generate_tokens(io.StringIO(source).readline))
    except (tokenize.TokenError, IndentationError, SyntaxError):
        tokens = None

    if tokens is not None:
        raw.extend(_check_tokens(tokens, source))
    raw.extend(_check_lines(source))

    findings = []
    for gline, col, code in raw:
        if gline - 1 >= len(line_map):
            continue
        cell_index, cell_line = line_map[gline - 1]
        findings.append(
            StyleFinding(notebook_id, cell_index, cell_line, col, code, DESCRIPTIONS[code])
        )
    findings.sort(key=lambda f: (f.cell_index, f.line, f.column, f.code))
    return findings


def _check_tokens(tokens, source: str):
    out = []
    out.extend(_e231_e225(tokens))
    out.extend(_comments(tokens))
    out.extend(_e741(tokens))
    out.extend(_imports_checks(tokens, source))
    return out


def _significant(tokens, start, direction=1):
    index = start + direction
    skip = {tokenize.NL, tokenize.NEWLINE, tokenize.COMMENT, tokenize.INDENT, tokenize.DEDENT}
    while 0 <= index < len(tokens) and tokens[index].type in skip:
        index += direction
    return tokens[index] if 0 <= index < len(tokens) else None


def _e231_e225(tokens):
    out = []
    bracket_stack: list[str] = []
    lambda_depth = None
    for i, tok in enumerate(tokens):
        if tok.type == tokenize.NAME and tok.string == "lambda" and lambda_depth is None:
            lambda_depth = len(bracket_stack)
        if tok.type != tokenize.OP:
            continue
        text = tok.string
        if text in "([{":
            bracket_stack.append(text)
        elif text in ")]}":
            if bracket_stack:
                bracket_stack.pop()

        line = tok.line
        end_row, end_col = tok.end
        after = line[end_col : end_col + 1]
        before = line[tok.start[1] - 1 : tok.start[1]] if tok.start[1] else ""

        if text in (",", ";"):
            if after not in ("", " ", "\t", "\n", "\r", ")"):
                out.append((end_row, end_col, "E231"))
        elif text == ":":
            in_slice = bool(bracket_stack) and bracket_stack[-1] == "["
            if lambda_depth is not None and len(bracket_stack) == lambda_depth:
                lambda_depth = None  # colon ends the lambda parameter list
            if not in_slice and after not in ("", " ", "\t", "\n", "\r"):
                out.append((end_row, end_col, "E231"))
        elif text in _E225_OPERATORS:
            if text == "=" and bracket_stack and bracket_stack[-1] == "(":
                continue  # keyword argument / default value
            if text == "=" and lambda_depth is not None:
                continue
            missing_before = before not in ("", " ", "\t")
            missing_after = after not in ("", " ", "\t", "\n", "\r")
            if missing_before or missing_after:
                out.append((tok.start[0], tok.start[1] + 1, "E225"))
    return out


def _comments(tokens):
    out = []
    for tok in tokens:
        if tok.type != tokenize.COMMENT:
            continue
        text = tok.string
        inline = bool(tok.line[: tok.start[1]].strip())
        symbol, _, _ = text.partition(" ")
        bad_prefix = symbol not in ("#", "#:") and (symbol.lstrip("#")[:1] or "#")
        if inline:
            if bad_prefix or text[:2] in ("#!", "#:"):
                out.append((tok.start[0], tok.start[1] + 1, "E262"))
        else:
            if bad_prefix and (bad_prefix != "!" or tok.start[0] > 1):
                if bad_prefix != "#":
                    out.append((tok.start[0], tok.start[1] + 1, "E265"))
    return out


def _e741(tokens):
    out = []
    for i, tok in enumerate(tokens):
        if tok.type != tokenize.NAME or tok.string not in _IDENTS_TO_AVOID:
            continue
        nxt = _significant(tokens, i)
        prev = _significant(tokens, i, -1)
        is_assign = nxt is not None and nxt.type == tokenize.OP and nxt.string in ("=", ":=")
        after_binder = prev is not None and prev.type == tokenize.NAME and prev.string in (
            "as", "for", "global", "nonlocal", "lambda",
        )
        if is_assign or after_binder:
            out.append((tok.start[0], tok.start[1] + 1, "E741"))
    return out


def _logical_lines(tokens):
    """Group tokens into logical lines (NEWLINE-terminated)."""
    current = []
    for tok in tokens:
        if tok.type in (tokenize.NL, tokenize.INDENT, tokenize.DEDENT):
            continue
        if tok.type == tokenize.NEWLINE:
            if current:
                yield current
            current = []
            continue
        if tok.type in (tokenize.ENDMARKER,):
            continue
        current.append(tok)
    if current:
        yield current


def _imports_checks(tokens, source: str):
    """E401, E402, E701, E703, F403, F401 over logical lines."""
    out = []
    code_seen = False
    seen_docstring = False
    imported: list[tuple[str, str, int, int]] = []  # (binding, module, line, col)
    identifier_uses: dict[str, int] = {}

    logical = list(_logical_lines(tokens))

    for line_toks in logical:
        significant = [t for t in line_toks if t.type not in (tokenize.COMMENT,)]
        if not significant:
            continue
        first = significant[0]
        indented = first.start[1] > 0

        is_import = first.type == tokenize.NAME and first.string in ("import", "from")

        # ---- E703 / E701 -------------------------------------------------
        last = significant[-1]
        if last.type == tokenize.OP and last.string == ";":
            out.append((last.start[0], last.start[1] + 1, "E703"))
        if first.type == tokenize.NAME and first.string in _COMPOUND_KEYWORDS:
            depth = 0
            for tok in significant:
                if tok.type == tokenize.OP:
                    if tok.string in "([{":
                        depth += 1
                    elif tok.string in ")]}":
                        depth -= 1
                    elif tok.string == ":" and depth == 0:
                        rest = [t for t in significant if t.start > tok.start and t.string != ";"]
                        if rest:
                            out.append((tok.start[0], tok.start[1] + 1, "E701"))
                        break

        # ---- import bookkeeping -----------------------------------------
        if is_import:
            names = [t.string for t in significant if t.type == tokenize.NAME]
            if first.string == "import":
                # E401: plain import with top-level comma
                depth = 0
                for tok in significant:
                    if tok.type == tokenize.OP:
                        if tok.string in "([{":
                            depth += 1
                        elif tok.string in ")]}":
                            depth -= 1
                        elif tok.string == "," and depth == 0:
                            out.append((tok.start[0], tok.start[1] + 1, "E401"))
                            break
                for binding, module in _plain_import_bindings(significant):
                    imported.append((binding, module, first.start[0], first.start[1] + 1))
            else:
                star = any(t.type == tokenize.OP and t.string == "*" for t in significant)
                if star:
                    out.append((first.start[0], first.start[1] + 1, "F403"))
                else:
                    for binding, module in _from_import_bindings(significant):
                        imported.append((binding, module, first.start[0], first.start[1] + 1))
            if not indented and code_seen:
                out.append((first.start[0], first.start[1] + 1, "E402"))
        else:
            if not indented:
                if first.type == tokenize.STRING and not seen_docstring and not code_seen:
                    seen_docstring = True
                elif first.type == tokenize.NAME and first.string in _E402_NEUTRAL:
                    pass
                elif (
                    first.type == tokenize.NAME
                    and first.string.startswith("__")
                    and first.string.endswith("__")
                ):
                    pass  # dunder assignment, e.g. __version__
                else:
                    code_seen = True
            for tok in line_toks:
                if tok.type == tokenize.NAME and not keyword.iskeyword(tok.string):
                    identifier_uses[tok.string] = identifier_uses.get(tok.string, 0) + 1

    # ---- F401 -----------------------------------------------------------
    for binding, module, line, col in imported:
        if identifier_uses.get(binding, 0) == 0:
            out.append((line, col, "F401"))
    return out


def _plain_import_bindings(toks):
    """Bindings for ``import a.b as c, d``: [(c, a.b), (d, d)]."""
    bindings = []
    i = 1
    while i < len(toks):
        module_parts = []
        while i < len(toks) and not (toks[i].type == tokenize.OP and toks[i].string == ","):
            if toks[i].type == tokenize.NAME and toks[i].string == "as":
                i += 1
                if i < len(toks):
                    bindings.append((toks[i].string, ".".join(module_parts)))
                    module_parts = None
                i += 1
                continue
            if toks[i].type == tokenize.NAME and module_parts is not None:
                module_parts.append(toks[i].string)
            i += 1
        if module_parts:
            bindings.append((module_parts[0], ".".join(module_parts)))
        i += 1
    return bindings


def _from_import_bindings(toks):
    """Bindings for ``from a.b import x as y, z``: [(y, a.b.x), (z, a.b.z)]."""
    module_parts = []
    i = 1
    while i < len(toks) and not (toks[i].type == tokenize.NAME and toks[i].string == "import"):
        if toks[i].type == tokenize.NAME:
            module_parts.append(toks[i].string)
        i += 1
    module = ".".join(module_parts)
    bindings = []
    i += 1
    current = None
    while i < len(toks):
        tok = toks[i]
        if tok.type == tokenize.NAME and tok.string == "as":
            i += 1
            if i < len(toks):
                bindings.append((toks[i].string, f"{module}.{current}"))
                current = None
        elif tok.type == tokenize.OP and tok.string == ",":
            if current is not None:
                bindings.append((current, f"{module}.{current}"))
                current = None
        elif tok.type == tokenize.NAME:
            current = tok.string
        i += 1
    if current is not None:
        bindings.append((current, f"{module}.{current}"))
    return bindings


def _check_lines(source: str):
    """Checks that survive an untokenizable source: none currently."""
    return []
