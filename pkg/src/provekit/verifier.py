"""Proof checking against the built-in toy formal system.

Toy goals are equations `<expr> = <expr>` over integer variables with `+`,
`*`, integer literals and parentheses. Proofs are whitespace-separated step
sequences; each step either rewrites the goal or abandons it (`sorry`).
A proof passes iff the final goal is syntactically `t = t`.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, replace

from .errors import ParseError
from .statements import FormalStatement, Binder

REWRITE_STEPS = ("add_zero", "zero_add", "mul_one", "one_mul", "mul_zero",
                 "comm_add", "norm")


@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    severity: str  # "error" | "warning"
    message: str

    def __post_init__(self):
        assert self.line >= 1 and self.col >= 1 and self.message


@dataclass(frozen=True)
class GoalState:
    hypotheses: tuple[tuple[str, str], ...]  # (name, type_text) pairs
    target: str

    def __post_init__(self):
        assert self.target
        names = [n for n, _ in self.hypotheses]
        assert len(names) == len(set(names)), "duplicate hypothesis names"


@dataclass(frozen=True)
class Verdict:
    passed: bool
    diagnostics: tuple[Diagnostic, ...]
    goals: tuple[GoalState, ...]
    wall_time: float
    backend: str

    def __post_init__(self):
        if self.passed:
            assert not self.goals
            assert not any(d.severity == "error" for d in self.diagnostics)


# --- toy expression language ---

_TOKEN = re.compile(r"\s*(\d+|[^\s()+*=]+|[()+*=])")


def _tokenize_expr(text: str):
    toks = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m or not m.group(1):
            raise ParseError("bad expression token", offset=pos)
        toks.append(m.group(1))
        pos = m.end()
    return toks


class _ExprParser:
    def __init__(self, tokens):
        self.toks = tokens
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def parse_sum(self):
        node = self.parse_product()
        while self.peek() == "+":
            self.next()
            node = ("add", node, self.parse_product())
        return node

    def parse_product(self):
        node = self.parse_atom()
        while self.peek() == "*":
            self.next()
            node = ("mul", node, self.parse_atom())
        return node

    def parse_atom(self):
        tok = self.next()
        if tok is None:
            raise ParseError("unexpected end of expression")
        if tok == "(":
            node = self.parse_sum()
            if self.next() != ")":
                raise ParseError("expected ')'")
            return node
        if tok.isdigit():
            return ("num", int(tok))
        if tok in ")+*=":
            raise ParseError(f"unexpected {tok!r} in expression")
        return ("var", tok)


def parse_expr(text: str):
    parser = _ExprParser(_tokenize_expr(text))
    node = parser.parse_sum()
    if parser.peek() is not None:
        raise ParseError(f"trailing tokens in expression: {parser.peek()!r}")
    return node


def parse_equation(text: str):
    """Split `lhs = rhs` at the single top-level `=` and parse both sides."""
    depth = 0
    eq = None
    for i, c in enumerate(text):
        if c == "(":
            depth += 1
        elif c == ")":
            depth -= 1
        elif c == "=" and depth == 0:
            if eq is not None:
                raise ParseError("multiple '=' in goal", offset=i)
            eq = i
    if eq is None:
        raise ParseError("goal is not an equation")
    return parse_expr(text[:eq]), parse_expr(text[eq + 1:])


def render_expr(node, parent=None) -> str:
    kind = node[0]
    if kind == "num":
        return str(node[1])
    if kind == "var":
        return node[1]
    left = render_expr(node[1], kind)
    right = render_expr(node[2], kind + "_rhs")
    text = f"{left} {'+' if kind == 'add' else '*'} {right}"
    # parenthesize when re-parsing would regroup: additions under products,
    # and right-nested chains of the same operator (parsing left-associates)
    needs_parens = (
        (kind == "add" and parent in ("mul", "mul_rhs", "add_rhs"))
        or (kind == "mul" and parent == "mul_rhs")
    )
    return f"({text})" if needs_parens else text


def render_equation(lhs, rhs) -> str:
    return f"{render_expr(lhs)} = {render_expr(rhs)}"


def _subst(node, name, value):
    kind = node[0]
    if kind == "var":
        return value if node[1] == name else node
    if kind in ("add", "mul"):
        return (kind, _subst(node[1], name, value), _subst(node[2], name, value))
    return node


def _rewrite_bottom_up(node, rule):
    """Apply `rule` to every subterm bottom-up; returns (node, changed)."""
    changed = False
    if node[0] in ("add", "mul"):
        left, cl = _rewrite_bottom_up(node[1], rule)
        right, cr = _rewrite_bottom_up(node[2], rule)
        node = (node[0], left, right)
        changed = cl or cr
    new = rule(node)
    if new is not None:
        return new, True
    return node, changed


_ZERO = ("num", 0)
_ONE = ("num", 1)

_LOCAL_RULES = {
    "add_zero": lambda n: n[1] if n[0] == "add" and n[2] == _ZERO else None,
    "zero_add": lambda n: n[2] if n[0] == "add" and n[1] == _ZERO else None,
    "mul_one": lambda n: n[1] if n[0] == "mul" and n[2] == _ONE else None,
    "one_mul": lambda n: n[2] if n[0] == "mul" and n[1] == _ONE else None,
    "mul_zero": lambda n: _ZERO if n[0] == "mul" and n[2] == _ZERO else None,
    "norm": lambda n: (("num", (n[1][1] + n[2][1]) if n[0] == "add" else n[1][1] * n[2][1])
                       if n[0] in ("add", "mul") and n[1][0] == "num" and n[2][0] == "num"
                       else None),
}


@dataclass
class _ProofRun:
    """Outcome of stepping a toy proof: where it stopped and why."""

    lhs: tuple
    rhs: tuple
    applied_tokens: list[str]  # tokens of successfully applied steps
    status: str  # "closed" | "open" | "sorry" | "error"
    diagnostics: list[Diagnostic]


def _parse_hypotheses(stmt: FormalStatement):
    """Split binders into rw-able equations and plain declarations."""
    equations = {}
    for b in stmt.binders:
        if "=" in b.type_text:
            lhs, rhs = parse_equation(b.type_text)
            if lhs[0] != "var":
                raise ParseError(f"hypothesis {b.name} must equate a variable")
            equations[b.name] = (lhs[1], rhs)
    return equations


def _run_proof(stmt: FormalStatement, proof: str, deadline: float | None = None) -> _ProofRun:
    lhs, rhs = parse_equation(stmt.goal_text)
    hyps = _parse_hypotheses(stmt)
    tokens = proof.split()
    diags: list[Diagnostic] = []
    applied: list[str] = []
    step_index = 0
    i = 0

    def fail(col, message, status="error"):
        diags.append(Diagnostic(1, col, "error", message))
        return _ProofRun(lhs, rhs, applied, status, diags)

    while i < len(tokens):
        if deadline is not None and time.monotonic() > deadline:
            diags.append(Diagnostic(1, i + 1, "error", "timeout"))
            return _ProofRun(lhs, rhs, applied, "error", diags)
        tok = tokens[i]
        col = i + 1  # 1-based token offset of the step
        step_index += 1
        goal_text = render_equation(lhs, rhs)
        if tok == "sorry":
            diags.append(Diagnostic(1, col, "warning", "proof contains 'sorry'"))
            return _ProofRun(lhs, rhs, applied, "sorry", diags)
        if tok == "rw":
            if i + 1 >= len(tokens):
                return fail(col, f"step {step_index} 'rw' is missing a hypothesis name")
            name = tokens[i + 1]
            if name not in hyps:
                return fail(col, f"step {step_index} 'rw {name}' does not apply to goal "
                                 f"'{goal_text}'")
            var, value = hyps[name]
            new_lhs = _subst(lhs, var, value)
            new_rhs = _subst(rhs, var, value)
            if new_lhs == lhs and new_rhs == rhs:
                return fail(col, f"step {step_index} 'rw {name}' does not apply to goal "
                                 f"'{goal_text}'")
            lhs, rhs = new_lhs, new_rhs
            applied.extend(["rw", name])
            i += 2
            continue
        if tok == "comm_add":
            changed = False
            if lhs[0] == "add":
                lhs = ("add", lhs[2], lhs[1])
                changed = True
            if rhs[0] == "add":
                rhs = ("add", rhs[2], rhs[1])
                changed = True
            if not changed:
                return fail(col, f"step {step_index} 'comm_add' does not apply to goal "
                                 f"'{goal_text}'")
            applied.append(tok)
            i += 1
            continue
        if tok in _LOCAL_RULES:
            rule = _LOCAL_RULES[tok]
            new_lhs, cl = _rewrite_bottom_up(lhs, rule)
            new_rhs, cr = _rewrite_bottom_up(rhs, rule)
            if not (cl or cr):
                return fail(col, f"step {step_index} '{tok}' does not apply to goal "
                                 f"'{goal_text}'")
            lhs, rhs = new_lhs, new_rhs
            applied.append(tok)
            i += 1
            continue
        return fail(col, f"step {step_index} '{tok}' is not a known step")

    if lhs == rhs:
        return _ProofRun(lhs, rhs, applied, "closed", diags)
    diags.append(Diagnostic(1, max(len(tokens), 1), "error",
                            f"unsolved goal '{render_equation(lhs, rhs)}'"))
    return _ProofRun(lhs, rhs, applied, "open", diags)


def _state_from_run(stmt: FormalStatement, run: _ProofRun) -> GoalState:
    hyps = tuple((b.name, b.type_text) for b in stmt.binders)
    return GoalState(hypotheses=hyps, target=render_equation(run.lhs, run.rhs))


class ToyVerifier:
    """Deterministic, stateless in-process verifier backend."""

    backend_id = "builtin"

    def verify(self, stmt: FormalStatement, proof: str, timeout: float = 60.0) -> Verdict:
        start = time.monotonic()
        try:
            run = _run_proof(stmt, proof, deadline=start + timeout)
        except ParseError as exc:
            diag = Diagnostic(1, 1, "error", str(exc))
            return Verdict(False, (diag,), (), time.monotonic() - start, self.backend_id)
        wall = time.monotonic() - start
        diags = tuple(sorted(run.diagnostics, key=lambda d: (d.line, d.col)))
        if run.status == "closed":
            return Verdict(True, diags, (), wall, self.backend_id)
        goals = (_state_from_run(stmt, run),)
        return Verdict(False, diags, goals, wall, self.backend_id)

    def extract_goals(self, stmt: FormalStatement, partial_proof: str,
                      timeout: float = 60.0) -> list[GoalState]:
        """Goal states remaining at the first failing/`sorry` cut point."""
        run = _run_proof(stmt, partial_proof, deadline=time.monotonic() + timeout)
        if run.status == "closed":
            return []
        return [_state_from_run(stmt, run)]

    def applied_prefix(self, stmt: FormalStatement, proof: str) -> str:
        """The proof prefix successfully applied before the first failure/sorry."""
        run = _run_proof(stmt, proof)
        return " ".join(run.applied_tokens)


def goal_to_statement(goal: GoalState, base_name: str, index: int = 0) -> FormalStatement:
    """Reify a goal state as a standalone statement named `<base>_goal<index>`."""
    from . import statements as st

    name = f"{base_name}_goal{index}"
    binders = tuple(Binder(n, t) for n, t in goal.hypotheses)
    stmt = FormalStatement(
        id=name, name=name, binders=binders, goal_text=goal.target,
        raw_text="", provenance="extracted_goal",
    )
    return replace(stmt, raw_text=st.render(stmt))
