"""Reference style checker used as the oracle for equivalence testing.

Deliberately built on different mechanics than the production checker:
a character-scanning string/comment masker plus per-line regex rules,
instead of the tokenize module.  Both implement the same published rule
subset, so their findings must agree.
"""

from __future__ import annotations

import re

_COMPOUND = {"if", "elif", "else", "for", "while", "try", "except", "finally", "with", "class"}
_NEUTRAL = {"if", "elif", "else", "try", "except", "finally", "with"}

_E225_OP_RE = re.compile(
    r"(<<=|>>=|//=|\*\*=|[-+*/%&|^@]=|:=|->|==|!=|<=|>=|[<>=])"
)
_E741_ASSIGN_RE = re.compile(r"(?<![\w.])([lOI])\s*(?:=(?![=])|:=)")
_E741_BINDER_RE = re.compile(r"\b(?:as|for|global|nonlocal|lambda)\s+([lOI])\b")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_PLAIN_IMPORT_RE = re.compile(r"^\s*import\s+(.+)$")
_FROM_IMPORT_RE = re.compile(r"^\s*from\s+([.\w]+)\s+import\s+(.+)$")


class _Masker:
    """Blanks out string contents and strips comments, char by char."""

    def __init__(self):
        self.quote = None  # active quote ("'", '"', "'''", '\"\"\"')

    def mask(self, line: str) -> tuple[str, int | None]:
        """Return (masked code, comment start column or None)."""
        out = []
        comment_at = None
        i = 0
        while i < len(line):
            ch = line[i]
            if self.quote:
                if line.startswith(self.quote, i):
                    out.append(self.quote)
                    i += len(self.quote)
                    self.quote = None
                elif ch == "\\":
                    out.append("  ")
                    i += 2
                else:
                    out.append(" ")
                    i += 1
                continue
            if ch in "\"'":
                triple = line[i:i + 3] in ("'''", '"""')
                self.quote = line[i:i + 3] if triple else ch
                out.append(self.quote)
                i += len(self.quote)
                continue
            if ch == "#":
                comment_at = i
                break
            out.append(ch)
            i += 1
        return "".join(out), comment_at


def _bracket_profile(code: str, depth: int, stack: list[str]):
    """Yield (index, char, depth_before, innermost) while updating state."""
    for i, ch in enumerate(code):
        innermost = stack[-1] if stack else None
        yield i, ch, depth, innermost
        if ch in "([{":
            stack.append(ch)
            depth += 1
        elif ch in ")]}" and stack:
            stack.pop()
            depth -= 1
    return


def reference_check(cell_sources: list[str]) -> set[tuple[int, int, int, str]]:
    """Findings as a set of (cell_index, line, column, code), 1-based."""
    findings: set[tuple[int, int, int, str]] = set()
    masker = _Masker()
    code_seen = False
    seen_docstring = False
    depth = 0
    stack: list[str] = []
    # binding -> (cell, line, col); usage counted over non-import code
    imports: dict[str, tuple[int, int, int]] = {}
    used: set[str] = set()
    first_line = True

    for cell, source in enumerate(cell_sources):
        for lineno, raw in enumerate(source.splitlines() or [""], start=1):
            if re.match(r"^\s*[%!]", raw):
                first_line = False
                continue
            code, comment_at = masker.mask(raw)

            # ---- comment rules -----------------------------------------
            if comment_at is not None:
                comment = raw[comment_at:]
                inline = bool(code[:comment_at].strip())
                head = comment.split(" ", 1)[0]
                bad = head not in ("#", "#:") and (head.lstrip("#")[:1] or "#")
                if inline:
                    if bad or comment[:2] in ("#!", "#:"):
                        findings.add((cell, lineno, comment_at + 1, "E262"))
                elif bad and bad != "#" and not (bad == "!" and first_line):
                    findings.add((cell, lineno, comment_at + 1, "E265"))
            first_line = False

            stripped = code.strip()
            at_statement_start = depth == 0
            indent = len(code) - len(code.lstrip())
            word = _IDENT_RE.match(stripped)
            first_word = word.group(0) if word else None

            # ---- punctuation spacing, per character --------------------
            line_colons_top: list[int] = []
            line_commas_top: list[int] = []
            for i, ch, d, innermost in _bracket_profile(code, depth, stack):
                nxt = code[i + 1] if i + 1 < len(code) else ""
                if ch in ",;":
                    if d == depth and ch == ",":
                        line_commas_top.append(i)
                    if nxt not in ("", " ", "\t", ")"):
                        findings.add((cell, lineno, i + 1, "E231"))
                elif ch == ":" and nxt != "=":
                    prev = code[i - 1] if i else ""
                    if prev in "=<>!+-*/%&|^:":
                        continue  # tail of a two-char operator
                    if innermost != "[" and nxt not in ("", " ", "\t"):
                        findings.add((cell, lineno, i + 1, "E231"))
                    if d == depth:
                        line_colons_top.append(i)

            # ---- operator spacing --------------------------------------
            for m in _E225_OP_RE.finditer(code):
                op = m.group(1)
                start, end = m.start(1), m.end(1)
                prev = code[start - 1] if start else ""
                nxt = code[end] if end < len(code) else ""
                if prev in "=<>!+-*/%&|^@:" or nxt in "=":
                    continue  # partial match of a longer operator
                if op == "=":
                    d = _depth_at(code, start, depth, stack)
                    if d[0] > 0 and d[1] == "(":
                        continue  # keyword argument or default
                    if _in_lambda_params(code, start):
                        continue
                missing_before = bool(prev) and prev not in " \t"
                missing_after = bool(nxt) and nxt not in " \t"
                if missing_before or missing_after:
                    findings.add((cell, lineno, start + 1, "E225"))

            # ---- ambiguous names ---------------------------------------
            for m in _E741_ASSIGN_RE.finditer(code):
                findings.add((cell, lineno, m.start(1) + 1, "E741"))
            for m in _E741_BINDER_RE.finditer(code):
                findings.add((cell, lineno, m.start(1) + 1, "E741"))

            # ---- statement-level rules ---------------------------------
            if at_statement_start and stripped:
                if stripped.rstrip().endswith(";"):
                    findings.add((cell, lineno, code.rstrip().rfind(";") + 1, "E703"))
                if first_word in _COMPOUND and line_colons_top:
                    colon = line_colons_top[0]
                    rest = code[colon + 1:].strip().strip(";").strip()
                    if rest:
                        findings.add((cell, lineno, colon + 1, "E701"))

                is_import = first_word in ("import", "from") and indent == 0
                m_plain = _PLAIN_IMPORT_RE.match(code) if first_word == "import" else None
                m_from = _FROM_IMPORT_RE.match(code) if first_word == "from" else None
                if m_plain and indent == 0:
                    if line_commas_top:
                        findings.add((cell, lineno, line_commas_top[0] + 1, "E401"))
                    for clause in m_plain.group(1).split(","):
                        parts = clause.strip().split()
                        if not parts:
                            continue
                        binding = parts[-1] if "as" in parts else parts[0].split(".")[0]
                        imports[binding] = (cell, lineno, indent + 1)
                if m_from and indent == 0:
                    if m_from.group(2).strip() == "*":
                        findings.add((cell, lineno, indent + 1, "F403"))
                    else:
                        for clause in m_from.group(2).split(","):
                            parts = clause.strip().split()
                            if not parts:
                                continue
                            binding = parts[-1] if "as" in parts else parts[0]
                            imports[binding] = (cell, lineno, indent + 1)
                if is_import and code_seen:
                    findings.add((cell, lineno, indent + 1, "E402"))
                if not is_import and indent == 0:
                    if stripped[0] in "\"'" and not seen_docstring and not code_seen:
                        seen_docstring = True
                    elif first_word in _NEUTRAL:
                        pass
                    elif first_word and first_word.startswith("__") and first_word.endswith("__"):
                        pass
                    else:
                        code_seen = True
                if not is_import:
                    used.update(_IDENT_RE.findall(code))
            elif stripped and not at_statement_start:
                used.update(_IDENT_RE.findall(code))

            # update global bracket depth for the next line
            for ch in code:
                if ch in "([{":
                    stack.append(ch)
                    depth += 1
                elif ch in ")]}" and stack:
                    stack.pop()
                    depth -= 1

    for binding, (cell, lineno, col) in imports.items():
        if binding not in used:
            findings.add((cell, lineno, col, "F401"))
    return findings


def _depth_at(code: str, index: int, base_depth: int, base_stack: list[str]):
    depth = base_depth
    innermost = base_stack[-1] if base_stack else None
    stack = list(base_stack)
    for ch in code[:index]:
        if ch in "([{":
            stack.append(ch)
            depth += 1
        elif ch in ")]}" and stack:
            stack.pop()
            depth -= 1
    return depth, (stack[-1] if stack else None)


def _in_lambda_params(code: str, index: int) -> bool:
    head = code[:index]
    m = list(re.finditer(r"\blambda\b", head))
    if not m:
        return False
    return ":" not in head[m[-1].end():]
