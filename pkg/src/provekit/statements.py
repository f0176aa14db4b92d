"""Parsing, rendering, negation and deduplication of formal theorem statements.

A statement header has the skeleton ``theorem <name> <binders...> : <goal> := <proof>``.
Binder types and the goal are kept as opaque balanced-token text; only the
skeleton tokens are given meaning. All functions here are pure.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace

from .errors import AlreadyNegated, MultipleTheorems, ParseError

OPEN = "({["
CLOSE = ")}]"
MATCH = {"(": ")", "{": "}", "[": "]"}

PROVENANCES = ("ingested", "negation", "extracted_goal", "informal_synthesis")

ANON = "_"  # placeholder name for bracket groups without a top-level colon


@dataclass(frozen=True)
class Binder:
    """One binder group from a theorem header."""

    name: str
    type_text: str
    kind: str = "explicit"  # "explicit" | "instance-implicit"
    bracket: str = "("  # opening delimiter, preserved for rendering

    def __post_init__(self):
        if not self.name or any(c.isspace() for c in self.name):
            raise ParseError(f"invalid binder name {self.name!r}")
        if not self.type_text:
            raise ParseError(f"binder {self.name!r} has empty type")

    def render(self) -> str:
        if self.name == ANON:
            return f"{self.bracket}{self.type_text}{MATCH[self.bracket]}"
        return f"{self.bracket}{self.name} : {self.type_text}{MATCH[self.bracket]}"


@dataclass(frozen=True)
class FormalStatement:
    id: str
    name: str
    binders: tuple[Binder, ...]
    goal_text: str
    raw_text: str
    provenance: str = "ingested"
    docstring: str | None = None

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ParseError(f"unknown provenance {self.provenance!r}")

    def structure(self):
        """Structural identity: everything except raw text and metadata."""
        return (self.name, self.binders, self.goal_text)


def _scan_balanced(text: str, start: int) -> int:
    """Return the index one past the group closing the bracket at `start`."""
    stack = [text[start]]
    i = start + 1
    while i < len(text):
        c = text[i]
        if c in OPEN:
            stack.append(c)
        elif c in CLOSE:
            if not stack or MATCH[stack[-1]] != c:
                raise ParseError("mismatched bracket", offset=i, expected=MATCH[stack[-1]] if stack else "opening bracket")
            stack.pop()
            if not stack:
                return i + 1
        i += 1
    raise ParseError("unclosed bracket", offset=start, expected=MATCH[text[start]])


def _top_level_positions(text: str, needle: str):
    """Positions where `needle` occurs at bracket depth 0."""
    depth = 0
    out = []
    i = 0
    while i < len(text):
        c = text[i]
        if c in OPEN:
            depth += 1
        elif c in CLOSE:
            depth -= 1
            if depth < 0:
                raise ParseError("unbalanced bracket", offset=i)
        elif depth == 0 and text.startswith(needle, i):
            out.append(i)
            i += len(needle)
            continue
        i += 1
    return out


def _parse_binder_group(group: str, offset: int) -> list[Binder]:
    """Parse one bracketed binder group into one binder per declared name."""
    bracket = group[0]
    inner = group[1:-1]
    kind = "explicit" if bracket == "(" else "instance-implicit"
    colons = [p for p in _top_level_positions(inner, ":") if not inner.startswith(":=", p)]
    if not colons:
        if kind == "explicit":
            raise ParseError("binder group without ':'", offset=offset, expected="':'")
        # anonymous instance binder such as `[Decidable p]`: carried verbatim
        return [Binder(ANON, inner.strip(), kind, bracket)]
    split = colons[0]
    names = inner[:split].split()
    type_text = inner[split + 1:].strip()
    if not names:
        raise ParseError("binder group without a name", offset=offset, expected="identifier")
    if not type_text:
        raise ParseError("binder group with empty type", offset=offset, expected="type expression")
    return [Binder(n, type_text, kind, bracket) for n in names]


def parse_theorem(text: str, stmt_id: str | None = None,
                  provenance: str = "ingested",
                  docstring: str | None = None) -> FormalStatement:
    """Parse a single theorem declaration into its structured form."""
    decls = [m.start() for m in re.finditer(r"\btheorem\b", text)
             if _is_top_level(text, m.start())]
    if len(decls) > 1:
        raise MultipleTheorems(f"found {len(decls)} theorem declarations", offset=decls[1])
    if not decls:
        raise ParseError("no theorem declaration found", offset=0, expected="'theorem'")

    pos = decls[0] + len("theorem")
    while pos < len(text) and text[pos].isspace():
        pos += 1
    name_start = pos
    while pos < len(text) and not text[pos].isspace() and text[pos] not in OPEN and text[pos] != ":":
        pos += 1
    name = text[name_start:pos]
    if not name:
        raise ParseError("missing theorem name", offset=name_start, expected="identifier")

    assigns = _top_level_positions(text[pos:], ":=")
    if not assigns:
        raise ParseError("missing ':='", offset=len(text), expected="':='")
    assign = pos + assigns[0]
    header = text[pos:assign]

    header_colons = [pos + p for p in _top_level_positions(header, ":")]
    if not header_colons:
        raise ParseError("missing header ':'", offset=assign, expected="':'")
    sep = header_colons[-1]

    goal_text = text[sep + 1:assign].strip()
    if not goal_text:
        raise ParseError("empty goal", offset=sep + 1, expected="goal expression")

    binders: list[Binder] = []
    i = pos
    while i < sep:
        c = text[i]
        if c.isspace():
            i += 1
        elif c in OPEN:
            end = _scan_balanced(text, i)
            binders.extend(_parse_binder_group(text[i:end], i))
            i = end
        else:
            raise ParseError(f"unexpected {c!r} in binder list", offset=i, expected="binder group or ':'")

    return FormalStatement(
        id=stmt_id if stmt_id is not None else name,
        name=name,
        binders=tuple(binders),
        goal_text=goal_text,
        raw_text=text,
        provenance=provenance,
        docstring=docstring,
    )


def _is_top_level(text: str, pos: int) -> bool:
    depth = 0
    for c in text[:pos]:
        if c in OPEN:
            depth += 1
        elif c in CLOSE:
            depth -= 1
    return depth == 0


def render(stmt: FormalStatement) -> str:
    """Canonical single-declaration text, always ending in `:= by sorry`."""
    parts = [f"theorem {stmt.name}"]
    parts.extend(b.render() for b in stmt.binders)
    return " ".join(parts) + f" : {stmt.goal_text} := by sorry"


def canonicalize(stmt: FormalStatement) -> FormalStatement:
    """Re-parse the canonical rendering, giving a statement with canonical raw text."""
    return parse_theorem(render(stmt), stmt_id=stmt.id,
                         provenance=stmt.provenance, docstring=stmt.docstring)


def negate(stmt: FormalStatement, taken: set[str] | None = None) -> FormalStatement:
    """Binder-free negation: goal becomes `¬ ∀ <binders...>, <goal>`.

    `taken` is the set of theorem names already present in the corpus; name
    collisions get a numeric suffix (Neg, Neg2, Neg3, ...).
    """
    if stmt.provenance == "negation":
        raise AlreadyNegated(f"{stmt.name} is already a negation")
    name = stmt.name + "Neg"
    if taken:
        counter = 2
        while name in taken:
            name = f"{stmt.name}Neg{counter}"
            counter += 1
    if stmt.binders:
        prefix = " ".join(b.render() for b in stmt.binders)
        goal = f"¬ ∀ {prefix}, {stmt.goal_text}"
    else:
        goal = f"¬ {stmt.goal_text}"
    out = FormalStatement(
        id=name,
        name=name,
        binders=(),
        goal_text=goal,
        raw_text="",
        provenance="negation",
        docstring=stmt.docstring,
    )
    return replace(out, raw_text=render(out))


def normalize_text(text: str) -> str:
    """Dedup key: strip trailing whitespace per line, collapse blank-line runs."""
    lines = [line.rstrip() for line in text.split("\n")]
    out = []
    for line in lines:
        if line == "" and out and out[-1] == "":
            continue
        out.append(line)
    return "\n".join(out)


def dedup(statements: list[FormalStatement]) -> list[FormalStatement]:
    """Keep the first occurrence of each normalized-text key, stable order."""
    seen = set()
    out = []
    for s in statements:
        key = normalize_text(s.raw_text)
        if key not in seen:
            seen.add(key)
            out.append(s)
    return out


# --- corpus files: JSON-lines, one statement per line ---

def load_corpus(path) -> list[FormalStatement]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            out.append(parse_theorem(
                rec["formal_statement"],
                stmt_id=rec["id"],
                provenance=rec.get("provenance") or "ingested",
                docstring=rec.get("informal_statement"),
            ))
    return out


def save_corpus(statements, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in statements:
            fh.write(json.dumps({
                "id": s.id,
                "formal_statement": s.raw_text,
                "informal_statement": s.docstring,
                "provenance": s.provenance,
            }, ensure_ascii=False) + "\n")
