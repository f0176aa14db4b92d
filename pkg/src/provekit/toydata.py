"""Desk-scale toy corpora plus matching mock-prover scripts.

Each statement is solvable in the builtin toy system; the generated script
controls which statements the mock prover solves at round 0, which failures
become fixable in correction rounds (only when error feedback is present),
and which statements get a per-sample coin flip between a right and wrong
round-0 reply.
"""

from __future__ import annotations

import json
import random

from .statements import FormalStatement, parse_theorem

# (statement template, correct proof, wrong proof)
_TEMPLATES = [
    ("theorem {name} (x : Int) : x + 0 = x := by sorry", "add_zero", "mul_one"),
    ("theorem {name} (x : Int) : 0 + x = x := by sorry", "zero_add", "add_zero"),
    ("theorem {name} (x : Int) : x * 1 = x := by sorry", "mul_one", "one_mul"),
    ("theorem {name} (x : Int) : 1 * x = x := by sorry", "one_mul", "mul_one"),
    ("theorem {name} (x : Int) : x * 0 = 0 := by sorry", "mul_zero", "mul_one"),
    ("theorem {name} (x : Int) : (x + 0) * 1 = x := by sorry",
     "add_zero mul_one", "mul_one"),
    ("theorem {name} (x : Int) (h : x = {k}) : x + 0 = {k} := by sorry",
     "rw h add_zero", "add_zero"),
]


def _reply(cot: str, proof: str) -> str:
    return f"{cot}\n```lean\n{proof}\n```\n"


def make_corpus(n_statements: int, solved_frac: float = 0.4,
                fixable_frac: float = 0.3, flaky_frac: float = 0.0,
                max_rounds: int = 2, seed: int = 0
                ) -> tuple[list[FormalStatement], list[dict]]:
    """Build `n_statements` toy statements plus mock script entries.

    `solved_frac` of statements get a correct round-0 reply; of the
    remainder, `fixable_frac` gain correction-round entries marked
    fixable_with_error; `flaky_frac` of the solved ones get an extra wrong
    round-0 entry so per-sample outcomes vary.
    """
    rng = random.Random(seed)
    statements = []
    entries = []
    n_solved = round(n_statements * solved_frac)
    n_failures = n_statements - n_solved
    n_fixable = round(n_failures * fixable_frac)
    n_flaky = round(n_solved * flaky_frac)

    for i in range(n_statements):
        name = f"toy_{i:04d}"
        template, good, bad = _TEMPLATES[i % len(_TEMPLATES)]
        text = template.format(name=name, k=rng.randint(1, 9))
        statements.append(parse_theorem(text, stmt_id=name))
        good_reply = _reply(f"Simplify the goal of {name} step by step.", good)
        bad_reply = _reply(f"Try a rewrite on {name}.", bad)
        if i < n_solved:
            entries.append({"match": {"statement_id": name, "round": 0},
                            "reply": good_reply, "fixable_with_error": False})
            if i < n_flaky:
                entries.append({"match": {"statement_id": name, "round": 0},
                                "reply": bad_reply, "fixable_with_error": False})
        else:
            entries.append({"match": {"statement_id": name, "round": 0},
                            "reply": bad_reply, "fixable_with_error": False})
            if i - n_solved < n_fixable:
                for r in range(1, max_rounds + 1):
                    entries.append({"match": {"statement_id": name, "round": r},
                                    "reply": good_reply, "fixable_with_error": True})
    return statements, entries


def write_mock_script(entries: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
