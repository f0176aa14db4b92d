"""Scaffolded statement synthesis.

Formal route: turn the unsolved goals of failed proof attempts into
standalone statements plus their negations. Informal route: generate
simpler/harder problem variants with an LLM, formalize them twice, gate each
formalization by a syntax check, faithfulness voting, and a
correctness/simplicity vote, negating statements judged incorrect.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources

from .errors import ExtractionEmpty, JudgeParseError
from .prover import GenerationResult, parse_proof_block
from .statements import FormalStatement, dedup, negate, parse_theorem
from .verifier import goal_to_statement

JUDGE_MAX_TOKENS = 4096
FAITHFUL_VOTES = 3
GATE_VOTES = 4
FORMALIZE_ATTEMPTS = 2

_JUDGE_TAG_RE = re.compile(r"<judge>(.*?)</judge>", re.DOTALL)
_JUDGEMENT_RE = re.compile(r"Judgement:\s*\[?\s*(Appropriate|Inappropriate)",
                           re.IGNORECASE)

_VALID_VOTES = {"yes", "no", "unsure"}


def _prompt(name: str) -> str:
    return resources.files("provekit.prompts").joinpath(name).read_text(encoding="utf-8")


@dataclass(frozen=True)
class JudgeVerdict:
    correctness: str  # yes | no | unsure
    simplicity: str
    raw_text: str
    faithfulness: str | None = None  # appropriate | inappropriate


def parse_judge_tags(text: str) -> JudgeVerdict:
    """Parse the first `<judge>correctness, simplicity</judge>` span."""
    m = _JUDGE_TAG_RE.search(text)
    if not m:
        raise JudgeParseError("no <judge> tag found")
    parts = [p.strip().lower() for p in m.group(1).split(",")]
    if len(parts) != 2 or any(p not in _VALID_VOTES for p in parts):
        raise JudgeParseError(f"malformed judge span {m.group(1)!r}")
    return JudgeVerdict(parts[0], parts[1], text)


def parse_faithfulness(text: str) -> str:
    m = _JUDGEMENT_RE.search(text)
    if not m:
        raise JudgeParseError("no 'Judgement:' verdict found")
    return m.group(1).lower()


def extract_tagged_problems(text: str) -> tuple[list[str], list[str]]:
    """Segments between <newproblem> tags; malformed spans are skipped with a
    recorded warning rather than failing the batch."""
    events = sorted(
        [(m.start(), "open", m.end()) for m in re.finditer("<newproblem>", text)]
        + [(m.start(), "close", m.end()) for m in re.finditer("</newproblem>", text)]
    )
    spans: list[str] = []
    warnings: list[str] = []
    open_at: int | None = None
    for pos, kind, end in events:
        if kind == "open":
            if open_at is not None:
                warnings.append(f"nested <newproblem> at offset {pos}; span skipped")
            open_at = end
        else:
            if open_at is None:
                warnings.append(f"unmatched </newproblem> at offset {pos}")
                continue
            spans.append(text[open_at:pos].strip())
            open_at = None
    if open_at is not None:
        warnings.append("unclosed <newproblem> span skipped")
    return [s for s in spans if s], warnings


def _call(backend, prompt: str, seed: int, max_tokens: int = JUDGE_MAX_TOKENS) -> GenerationResult:
    return backend.generate(prompt, max_tokens, 1.0, seed)


# --- formal-based scaffolding ---

def formal_scaffold(stmt: FormalStatement, failed_attempts: list[str],
                    verifier) -> list[FormalStatement]:
    """Extracted subgoal statements plus their negations, deduplicated."""
    unique_goals = []
    seen = set()
    for proof in failed_attempts:
        verdict = verifier.verify(stmt, proof)
        if verdict.passed:
            raise ValueError("attempt unexpectedly passes verification; "
                             "formal scaffolding needs failed attempts")
        for goal in verifier.extract_goals(stmt, proof):
            key = (goal.hypotheses, goal.target)
            if key not in seen:
                seen.add(key)
                unique_goals.append(goal)
    out: list[FormalStatement] = []
    taken = {stmt.name}
    for i, goal in enumerate(unique_goals):
        extracted = goal_to_statement(goal, stmt.name, i)
        neg = negate(extracted, taken)
        taken.update({extracted.name, neg.name})
        out.extend([extracted, neg])
    return dedup(out)


# --- informal-based scaffolding ---

@dataclass
class VariantResult:
    problems: list[str]
    solution: str
    warnings: list[str]
    transcripts: list[str]


def generate_variants(problem: FormalStatement | str, solved: bool,
                      llm_backend, seed: int = 0) -> VariantResult:
    """One solve call for context, then one variant-generation call; harder
    variants for solved problems, simpler sub-problems otherwise."""
    problem_text = problem.raw_text if isinstance(problem, FormalStatement) else problem
    solve_prompt = _prompt("solve_problem.txt").replace("{problem}", problem_text)
    solution = _call(llm_backend, solve_prompt, seed).full_text

    template = _prompt("harder_variants.txt" if solved else "simpler_problems.txt")
    gen_prompt = template.replace("{problem}", problem_text)
    gen_prompt = gen_prompt.replace("{solution}", solution)
    reply = _call(llm_backend, gen_prompt, seed + 1).full_text

    problems, warnings = extract_tagged_problems(reply)
    if not problems:
        raise ExtractionEmpty("no <newproblem> spans in variant reply")
    return VariantResult(problems, solution, warnings, [solution, reply])


@dataclass
class FormalizationAudit:
    informal: str
    formalizations: list[dict] = field(default_factory=list)
    faithful_votes: list[list[str]] = field(default_factory=list)


def _syntax_ok(stmt: FormalStatement, verifier) -> bool:
    verdict = verifier.verify(stmt, "sorry")
    return not any(d.severity == "error" for d in verdict.diagnostics)


def formalize_and_check(informal: str, formalizer_backend, judge_backend,
                        verifier, seed: int = 0) -> tuple[FormalStatement | None, FormalizationAudit]:
    """Two formalization attempts; the first that passes both the verifier
    syntax check and a 3-vote faithfulness majority is kept."""
    audit = FormalizationAudit(informal)
    judge_template = _prompt("judge_faithfulness.txt")
    kept = None
    for attempt in range(FORMALIZE_ATTEMPTS):
        reply = _call(formalizer_backend, informal, seed + attempt).full_text
        _, block = parse_proof_block(reply)
        candidate_text = (block or reply).strip()
        entry = {"text": candidate_text, "syntax_ok": False, "faithful": False}
        audit.formalizations.append(entry)
        try:
            stmt = parse_theorem(candidate_text, provenance="informal_synthesis",
                                 docstring=informal)
        except Exception:
            audit.faithful_votes.append([])
            continue
        if not _syntax_ok(stmt, verifier):
            audit.faithful_votes.append([])
            continue
        entry["syntax_ok"] = True
        prompt = judge_template.replace("{informal_statement}", informal)
        prompt = prompt.replace("{formal_statement}", candidate_text)
        votes = []
        for v in range(FAITHFUL_VOTES):
            text = _call(judge_backend, prompt, seed + 10 * attempt + v).full_text
            try:
                votes.append(parse_faithfulness(text))
            except JudgeParseError:
                votes.append("inappropriate")  # unparseable vote counts against
        audit.faithful_votes.append(votes)
        if votes.count("appropriate") * 2 > FAITHFUL_VOTES:
            entry["faithful"] = True
            if kept is None:
                kept = stmt
    return kept, audit


def correctness_simplicity_gate(stmt: FormalStatement, judge_backend,
                                seed: int = 0) -> tuple[str, list[JudgeVerdict]]:
    """4-vote gate. Unanimous 'simple' discards; a strict 3-of-4 correctness
    majority keeps; 3-of-4 'incorrect' keeps the negation; anything else is
    discarded. Returns (decision, votes)."""
    template = _prompt("judge_correctness.txt")
    prompt = template.replace("{formal_statement}", stmt.raw_text)
    votes: list[JudgeVerdict] = []
    for v in range(GATE_VOTES):
        text = _call(judge_backend, prompt, seed + v).full_text
        try:
            votes.append(parse_judge_tags(text))
        except JudgeParseError:
            votes.append(JudgeVerdict("unsure", "unsure", text))
    if all(v.simplicity == "yes" for v in votes):
        return "discard", votes
    correct_yes = sum(v.correctness == "yes" for v in votes)
    correct_no = sum(v.correctness == "no" for v in votes)
    if correct_yes >= 3:
        return "keep", votes
    if correct_no >= 3:
        return "keep_negated", votes
    return "discard", votes


@dataclass
class SynthesisReport:
    emitted: list[FormalStatement]
    audit_records: list[dict]
    failures: list[str]


def synthesize(problems: list[tuple[FormalStatement, bool]], llm_backend,
               formalizer_backend, judge_backend, verifier,
               seed: int = 0, audit_path=None) -> SynthesisReport:
    """Full informal pipeline over (statement, solved) pairs. Per-item
    failures are reported, never fatal."""
    emitted: list[FormalStatement] = []
    audit_records: list[dict] = []
    failures: list[str] = []
    taken = {s.name for s, _ in problems}
    for idx, (problem, solved) in enumerate(problems):
        try:
            variants = generate_variants(problem, solved, llm_backend, seed + 1000 * idx)
        except ExtractionEmpty as exc:
            failures.append(f"{problem.id}: {exc}")
            continue
        for jdx, informal in enumerate(variants.problems):
            item_seed = seed + 1000 * idx + 10 * jdx
            formal, f_audit = formalize_and_check(
                informal, formalizer_backend, judge_backend, verifier, item_seed)
            record = {
                "informal": informal,
                "formalizations": f_audit.formalizations,
                "faithful_votes": f_audit.faithful_votes,
                "gate_votes": [],
                "decision": "no_formalization",
                "emitted": None,
            }
            if formal is not None:
                decision, votes = correctness_simplicity_gate(
                    formal, judge_backend, item_seed)
                record["gate_votes"] = [
                    {"correctness": v.correctness, "simplicity": v.simplicity,
                     "raw_text": v.raw_text}
                    for v in votes
                ]
                record["decision"] = decision
                if decision == "keep":
                    emitted.append(formal)
                    taken.add(formal.name)
                    record["emitted"] = formal.raw_text
                elif decision == "keep_negated":
                    neg = negate(formal, taken)
                    taken.add(neg.name)
                    emitted.append(neg)
                    record["emitted"] = neg.raw_text
            audit_records.append(record)
    emitted = dedup(emitted)
    if audit_path is not None:
        with open(audit_path, "w", encoding="utf-8") as fh:
            for rec in audit_records:
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    return SynthesisReport(emitted, audit_records, failures)


class ScriptedBackend:
    """FIFO scripted backend for desk-scale runs and tests: replies are
    consumed in call order."""

    backend_id = "scripted"

    def __init__(self, replies: list[str]):
        self.replies = list(replies)
        self.calls = 0

    @classmethod
    def from_file(cls, path) -> "ScriptedBackend":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        return cls(data["replies"] if isinstance(data, dict) else data)

    def generate(self, prompt, max_tokens, temperature, seed,
                 statement_id=None, round_index=0) -> GenerationResult:
        reply = self.replies[self.calls % len(self.replies)] if self.replies else ""
        self.calls += 1
        cot, proof = parse_proof_block(reply)
        return GenerationResult(reply, cot, proof, len(prompt.split()),
                                min(len(reply.split()), max_tokens), "stop")
