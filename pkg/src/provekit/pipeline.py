"""Orchestration: parallel sampling with serial self-correction rounds,
benchmark runs with resumable result files, SFT data collection, and
subgoal-based proof repair.

Run directory layout: manifest.json, results.jsonl, sft.jsonl, metrics.json.
Results are append-only JSON-lines keyed by (statement_id, sample, round);
runs with identical configs and the mock backend are byte-deterministic.
"""

from __future__ import annotations

import hashlib
import json
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import metrics as metrics_mod
from .config import RunConfig
from .errors import BackendError, BackendUnavailable, EmptyCorpus, RepairFailed
from .prover import (AttemptContext, GenerationResult, TemplateRegistry,
                     build_correction_prompt, build_initial_prompt,
                     default_registry, derive_seed)
from .statements import FormalStatement, normalize_text
from .verifier import Diagnostic, Verdict, goal_to_statement

NO_PROOF_DIAG = "no proof block emitted"
BACKEND_FAIL_DIAG = "generation backend unavailable"


@dataclass
class AttemptTrace:
    sample_index: int
    round: int
    prompt: str
    generation: GenerationResult
    verdict: Verdict


@dataclass
class ProblemResult:
    statement_id: str
    attempts: list[AttemptTrace]
    solved: bool
    first_success: tuple[int, int] | None
    tokens_spent: int
    backend_failed: bool = False


@dataclass
class RunReport:
    out_dir: Path
    results: list[ProblemResult]
    metrics: dict
    excluded: int


def _fail_verdict(message: str, backend: str = "synthetic") -> Verdict:
    return Verdict(False, (Diagnostic(1, 1, "error", message),), (), 0.0, backend)


def prove_sample(stmt: FormalStatement, sample_index: int, backend, verifier,
                 cfg: RunConfig, registry: TemplateRegistry | None = None) -> list[AttemptTrace]:
    """Round 0 plus serial correction rounds for one sample, stopping early
    on success or when the token budget is spent."""
    registry = registry or default_registry()
    traces: list[AttemptTrace] = []
    prior: list[tuple[str, str, tuple[Diagnostic, ...]]] = []
    spent = 0
    for round_index in range(cfg.max_rounds + 1):
        budget_left = cfg.tokens_total - spent
        if budget_left <= 0:
            break
        max_tokens = min(cfg.tokens_first, budget_left) if round_index == 0 else budget_left
        if round_index == 0:
            prompt = build_initial_prompt(stmt, registry=registry)
        else:
            history = prior if cfg.correction_history == "all" else prior[-1:]
            ctx = AttemptContext(
                statement=stmt,
                prior_attempts=tuple(history),
                include_error_messages=cfg.include_error_messages,
                include_prior_cot=cfg.include_prior_cot,
            )
            prompt = build_correction_prompt(ctx, registry=registry)
        seed = derive_seed(cfg.seed, stmt.id, sample_index, round_index)
        try:
            gen = backend.generate(prompt, max_tokens, cfg.temperature, seed,
                                   statement_id=stmt.id, round_index=round_index)
        except (BackendError, BackendUnavailable):
            gen = GenerationResult("", "", "", 0, 0, "backend_error")
            traces.append(AttemptTrace(sample_index, round_index, prompt, gen,
                                       _fail_verdict(BACKEND_FAIL_DIAG)))
            break
        spent += gen.completion_tokens
        if not gen.proof_text:
            verdict = _fail_verdict(NO_PROOF_DIAG)
        else:
            verdict = verifier.verify(stmt, gen.proof_text, cfg.verify_timeout)
        traces.append(AttemptTrace(sample_index, round_index, prompt, gen, verdict))
        if verdict.passed:
            break
        prior.append((gen.cot_text, gen.proof_text, verdict.diagnostics))
    return traces


def _result_from_traces(statement_id: str, traces: list[AttemptTrace]) -> ProblemResult:
    successes = [(t.sample_index, t.round) for t in traces if t.verdict.passed]
    return ProblemResult(
        statement_id=statement_id,
        attempts=traces,
        solved=bool(successes),
        first_success=min(successes) if successes else None,
        tokens_spent=sum(t.generation.completion_tokens for t in traces),
        backend_failed=any(t.generation.finish_reason == "backend_error" for t in traces),
    )


def prove_statement(stmt: FormalStatement, backend, verifier, cfg: RunConfig,
                    registry: TemplateRegistry | None = None) -> ProblemResult:
    traces: list[AttemptTrace] = []
    for sample in range(cfg.n_samples):
        traces.extend(prove_sample(stmt, sample, backend, verifier, cfg, registry))
    return _result_from_traces(stmt.id, traces)


# --- persistent runs ---

def corpus_digest(corpus: list[FormalStatement]) -> str:
    h = hashlib.sha256()
    for s in corpus:
        h.update(normalize_text(s.raw_text).encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()


def _record_from_trace(stmt_id: str, trace: AttemptTrace, final: bool) -> dict:
    return {
        "statement_id": stmt_id,
        "sample": trace.sample_index,
        "round": trace.round,
        "cot": trace.generation.cot_text,
        "proof": trace.generation.proof_text,
        "pass": trace.verdict.passed,
        "diagnostics": [[d.line, d.col, d.severity, d.message]
                        for d in trace.verdict.diagnostics],
        "completion_tokens": trace.generation.completion_tokens,
        "finish_reason": trace.generation.finish_reason,
        "final": final,
    }


def _trace_from_record(rec: dict) -> AttemptTrace:
    diags = tuple(Diagnostic(*d) for d in rec["diagnostics"])
    verdict = Verdict(rec["pass"], diags, (), 0.0, "replay")
    gen = GenerationResult(
        full_text="", cot_text=rec["cot"], proof_text=rec["proof"],
        prompt_tokens=0, completion_tokens=rec["completion_tokens"],
        finish_reason=rec["finish_reason"],
    )
    return AttemptTrace(rec["sample"], rec["round"], "", gen, verdict)


def _load_existing(path: Path) -> dict[tuple[str, int], list[dict]]:
    """Completed samples from a prior run: (statement_id, sample) -> records.

    A sample counts as complete only if its last record carries final=true.
    Duplicate keys keep the latest records.
    """
    if not path.exists():
        return {}
    by_sample: dict[tuple[str, int], dict[int, dict]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            key = (rec["statement_id"], rec["sample"])
            by_sample.setdefault(key, {})[rec["round"]] = rec
    complete = {}
    for key, rounds in by_sample.items():
        ordered = [rounds[r] for r in sorted(rounds)]
        if ordered and ordered[-1]["final"]:
            complete[key] = ordered
    return complete


def compute_metrics(results: list[ProblemResult], cfg: RunConfig) -> tuple[dict, int]:
    included = [r for r in results if not (r.backend_failed and not r.solved)]
    excluded = len(results) - len(included)
    counts = []
    for r in included:
        passing_samples = {t.sample_index for t in r.attempts if t.verdict.passed}
        counts.append((cfg.n_samples, len(passing_samples)))
    pass_at = {}
    if counts:
        for k, value in metrics_mod.scaling_curve(counts, cfg.default_ks()):
            pass_at[str(k)] = value
    payload = {
        "pass_at": pass_at,
        "n": cfg.n_samples,
        "solved": sum(1 for r in included if r.solved),
        "total": len(included),
        "excluded": excluded,
        "stderr": None,
    }
    return payload, excluded


def run_benchmark(corpus: list[FormalStatement], cfg: RunConfig, backend,
                  verifier, out_dir, resume: bool = False,
                  registry: TemplateRegistry | None = None) -> RunReport:
    if not corpus:
        raise EmptyCorpus("statement corpus is empty")
    registry = registry or default_registry()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results_path = out / "results.jsonl"
    manifest_path = out / "manifest.json"

    existing = _load_existing(results_path) if resume else {}
    if not resume or not manifest_path.exists():
        manifest = {
            "run_id": uuid.uuid4().hex[:12],
            "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "config": cfg.snapshot(),
            "corpus_digest": corpus_digest(corpus),
            "statements": [s.id for s in corpus],
        }
        manifest_path.write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    futures = {}
    results: list[ProblemResult] = []
    with ThreadPoolExecutor(max_workers=cfg.gen_workers) as pool:
        for stmt in corpus:
            for sample in range(cfg.n_samples):
                key = (stmt.id, sample)
                if key not in existing:
                    futures[key] = pool.submit(prove_sample, stmt, sample,
                                               backend, verifier, cfg, registry)
        # statements are written in corpus order so reruns are byte-identical
        with open(results_path, "a" if resume else "w", encoding="utf-8") as fh:
            for stmt in corpus:
                traces: list[AttemptTrace] = []
                for sample in range(cfg.n_samples):
                    key = (stmt.id, sample)
                    if key in futures:
                        sample_traces = futures[key].result()
                        for i, trace in enumerate(sample_traces):
                            rec = _record_from_trace(
                                stmt.id, trace, final=(i == len(sample_traces) - 1))
                            fh.write(json.dumps(rec, ensure_ascii=False,
                                                sort_keys=True) + "\n")
                        traces.extend(sample_traces)
                    else:
                        traces.extend(_trace_from_record(r) for r in existing[key])
                results.append(_result_from_traces(stmt.id, traces))

    payload, excluded = compute_metrics(results, cfg)
    (out / "metrics.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return RunReport(out, results, payload, excluded)


# --- SFT data collection ---

def collect_sft(results: list[ProblemResult],
                statements_by_id: dict[str, FormalStatement],
                out_path, source_run: str = "",
                max_per_statement: int = 2) -> int:
    """Emit whole-proof records for verified successes plus correction
    records pairing a failed attempt with its fix. Returns the record count."""
    from .prover import render_diagnostic

    written = 0
    with open(out_path, "w", encoding="utf-8") as fh:
        for result in results:
            stmt = statements_by_id[result.statement_id]
            successes = sorted(
                (t for t in result.attempts if t.verdict.passed),
                key=lambda t: (t.sample_index, t.round),
            )
            by_key = {(t.sample_index, t.round): t for t in result.attempts}
            for trace in successes[:max_per_statement]:
                fh.write(json.dumps({
                    "kind": "whole_proof",
                    "statement_id": result.statement_id,
                    "statement": stmt.raw_text,
                    "cot": trace.generation.cot_text,
                    "proof": trace.generation.proof_text,
                    "round": trace.round,
                    "source_run": source_run,
                }, ensure_ascii=False) + "\n")
                written += 1
                if trace.round > 0:
                    prev = by_key.get((trace.sample_index, trace.round - 1))
                    if prev is None:
                        continue
                    fh.write(json.dumps({
                        "kind": "correction",
                        "statement_id": result.statement_id,
                        "statement": stmt.raw_text,
                        "failed_cot": prev.generation.cot_text,
                        "failed_proof": prev.generation.proof_text,
                        "diagnostics": [render_diagnostic(d)
                                        for d in prev.verdict.diagnostics],
                        "cot": trace.generation.cot_text,
                        "proof": trace.generation.proof_text,
                        "round": trace.round,
                        "source_run": source_run,
                    }, ensure_ascii=False) + "\n")
                    written += 1
    return written


# --- subgoal-based proof repair ---

def _failure_prefix(stmt: FormalStatement, failed_proof: str, verifier) -> str:
    """Proof prefix up to the failure cut. Uses the verifier's own notion of
    the applied prefix when it exposes one; otherwise cuts at the first
    `sorry` token."""
    if hasattr(verifier, "applied_prefix"):
        return verifier.applied_prefix(stmt, failed_proof)
    tokens = failed_proof.split()
    if "sorry" in tokens:
        return " ".join(tokens[:tokens.index("sorry")])
    return ""


def repair_proof(stmt: FormalStatement, failed_proof: str, backend, verifier,
                 cfg: RunConfig, registry: TemplateRegistry | None = None) -> str:
    """Extract the unsolved subgoal, prove it standalone with a fresh budget,
    splice the subgoal proof at the cut point, and re-verify."""
    verdict = verifier.verify(stmt, failed_proof, cfg.verify_timeout)
    if verdict.passed:
        raise ValueError("proof already verifies; nothing to repair")
    goals = verifier.extract_goals(stmt, failed_proof, cfg.verify_timeout)
    if not goals:
        raise RepairFailed("no unsolved goal could be extracted")
    sub_stmt = goal_to_statement(goals[0], stmt.name, 0)
    sub_result = prove_statement(sub_stmt, backend, verifier, cfg, registry)
    if not sub_result.solved:
        raise RepairFailed(f"subgoal {sub_stmt.name} unsolved")
    success = min((t for t in sub_result.attempts if t.verdict.passed),
                  key=lambda t: (t.sample_index, t.round))
    prefix = _failure_prefix(stmt, failed_proof, verifier)
    repaired = f"{prefix} {success.generation.proof_text}".strip()
    final = verifier.verify(stmt, repaired, cfg.verify_timeout)
    if not final.passed:
        raise RepairFailed("spliced proof still fails verification")
    return repaired
