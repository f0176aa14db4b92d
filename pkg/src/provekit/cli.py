"""Command-line entry point exposing every pipeline as a subcommand.

Exit codes: 0 success, 1 configuration/input error, 2 completed with
partial backend failures.
"""

from __future__ import annotations

import argparse
import json
import shlex
import sys
from pathlib import Path

from . import averaging, metrics, pipeline, rl_prep, statements, subproc, synthesis
from .config import RunConfig
from .errors import DomainError, ProvekitError
from .prover import HTTPBackend, MockBackend
from .verifier import ToyVerifier


class CliError(Exception):
    """User-facing configuration or input error (exit code 1)."""


def make_backend(cfg: RunConfig):
    if cfg.prover_backend == "mock":
        if not cfg.mock_script:
            raise CliError("mock backend requires --mock-script")
        return MockBackend(cfg.mock_script)
    if cfg.prover_backend == "http":
        if not cfg.prover_url:
            raise CliError("http backend requires PROVER_URL or --prover-url")
        return HTTPBackend(cfg.prover_url, cfg.prover_token,
                           cfg.prover_model or "prover")
    raise CliError(f"unknown prover backend {cfg.prover_backend!r}")


def make_verifier(cfg: RunConfig):
    if cfg.verifier_backend == "builtin":
        return ToyVerifier()
    if cfg.verifier_backend == "subprocess":
        if not cfg.verifier_cmd:
            raise CliError("subprocess verifier requires VERIFIER_CMD")
        return subproc.SubprocessVerifier(shlex.split(cfg.verifier_cmd),
                                          pool_size=1)
    raise CliError(f"unknown verifier backend {cfg.verifier_backend!r}")


def _load_corpus(path: str):
    p = Path(path)
    if not p.exists():
        raise CliError(f"corpus file not found: {p}")
    return statements.load_corpus(p)


def _resolve(args, extra_overrides=None) -> RunConfig:
    overrides = dict(extra_overrides or {})
    for flag, key in [
        ("n", "n_samples"), ("rounds", "max_rounds"),
        ("tokens_first", "tokens_first"), ("tokens_total", "tokens_total"),
        ("seed", "seed"), ("workers", "gen_workers"),
        ("mock_script", "mock_script"), ("backend", "prover_backend"),
        ("verifier", "verifier_backend"), ("prover_url", "prover_url"),
    ]:
        if getattr(args, flag, None) is not None:
            overrides[key] = getattr(args, flag)
    if getattr(args, "no_error_messages", False):
        overrides["include_error_messages"] = False
    if getattr(args, "no_prior_cot", False):
        overrides["include_prior_cot"] = False
    try:
        return RunConfig.resolve(config_file=getattr(args, "config", None),
                                 overrides=overrides)
    except (ValueError, OSError) as exc:
        raise CliError(str(exc)) from exc


# --- subcommands ---

def cmd_prove(args) -> int:
    cfg = _resolve(args)
    corpus = _load_corpus(args.corpus)
    if args.dry_run:
        print(json.dumps({"plan": "prove", "statements": len(corpus),
                          "config": cfg.snapshot()}, indent=2, sort_keys=True))
        return 0
    backend = make_backend(cfg)
    verifier = make_verifier(cfg)
    report = pipeline.run_benchmark(corpus, cfg, backend, verifier,
                                    args.out, resume=args.resume)
    solved = report.metrics["solved"]
    print(f"solved {solved}/{report.metrics['total']} statements "
          f"({report.excluded} excluded); metrics in {report.out_dir}/metrics.json")
    return 2 if report.excluded else 0


def cmd_stats(args) -> int:
    ks = [int(k) for k in args.k.split(",")] if args.k else None
    payloads = []
    for run_dir in args.run_dir:
        path = Path(run_dir) / "metrics.json"
        if not path.exists():
            raise CliError(f"no metrics.json under {run_dir}")
        payloads.append(json.loads(path.read_text(encoding="utf-8")))
    if len(payloads) == 1:
        m = payloads[0]
        rows = m["pass_at"]
        if ks:
            missing = [k for k in ks if str(k) not in rows]
            if missing:
                raise DomainError(f"pass@{missing} not recorded (n={m['n']})")
            rows = {str(k): rows[str(k)] for k in ks}
        print(f"{'k':>8}  {'pass@k':>10}")
        for k in sorted(rows, key=int):
            print(f"{k:>8}  {rows[k]:>10.4f}")
    else:
        keys = set(payloads[0]["pass_at"])
        for p in payloads[1:]:
            keys &= set(p["pass_at"])
        if ks:
            keys &= {str(k) for k in ks}
        print(f"{'k':>8}  {'mean':>10}  {'stderr':>10}")
        for k in sorted(keys, key=int):
            mean, stderr = metrics.aggregate_with_stderr(
                [p["pass_at"][k] for p in payloads])
            err = f"{stderr:.4f}" if stderr is not None else "n/a"
            print(f"{k:>8}  {mean:>10.4f}  {err:>10}")
    return 0


def cmd_negate(args) -> int:
    corpus = _load_corpus(args.corpus)
    taken = {s.name for s in corpus}
    out = []
    for s in corpus:
        neg = statements.negate(s, taken)
        taken.add(neg.name)
        out.append(neg)
    statements.save_corpus(out, args.out)
    print(f"wrote {len(out)} negated statements to {args.out}")
    return 0


def cmd_average(args) -> int:
    base = averaging.read_checkpoint(args.base)
    tuned = averaging.read_checkpoint(args.tuned)
    if args.sweep:
        alphas = [float(a) for a in args.sweep.split(",")]
        out_dir = Path(args.out or ".")
        out_dir.mkdir(parents=True, exist_ok=True)
        for alpha, ckpt in zip(alphas, averaging.sweep(base, tuned, alphas)):
            path = out_dir / f"avg_{alpha}.gpck"
            averaging.write_checkpoint(ckpt, path)
            print(f"alpha={alpha} -> {path}")
        return 0
    if args.alpha is None or not args.out:
        raise CliError("average requires --alpha and --out (or --sweep)")
    ckpt = averaging.average(base, tuned, args.alpha)
    averaging.write_checkpoint(ckpt, args.out)
    print(f"alpha={args.alpha} -> {args.out}")
    return 0


def cmd_rl_prep(args) -> int:
    lo, hi = (float(x) for x in args.filter.split(","))
    groups = rl_prep.load_rollout_groups(args.rollouts)
    kept = rl_prep.dynamic_filter(groups, lo, hi)
    if args.dry_run:
        print(json.dumps({"plan": "rl-prep", "groups": len(groups),
                          "kept": len(kept), "filter": [lo, hi]}, indent=2))
        return 0
    if args.batch_size:
        whole = [g for g in kept if g.task_kind == "whole_proof"]
        corr = [g for g in kept if g.task_kind == "correction_round_1"]
        kept = rl_prep.compose_batch(whole, corr, args.batch_size,
                                     mix=args.mix, seed=args.seed or 0)
    rl_prep.export_groups(kept, args.out)
    print(f"wrote {len(kept)} groups to {args.out} "
          f"(oversample plan: {rl_prep.oversample_plan(args.batch_size)})"
          if args.batch_size else
          f"wrote {len(kept)} groups to {args.out}")
    return 0


def cmd_repair(args) -> int:
    cfg = _resolve(args, {"n_samples": args.n or 1})
    corpus = _load_corpus(args.corpus)
    by_id = {s.id: s for s in corpus}
    proofs = []
    with open(args.proofs, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                proofs.append(json.loads(line))
    if args.dry_run:
        print(json.dumps({"plan": "repair", "proofs": len(proofs)}, indent=2))
        return 0
    backend = make_backend(cfg)
    verifier = make_verifier(cfg)
    repaired = 0
    with open(args.out, "w", encoding="utf-8") as fh:
        for rec in proofs:
            stmt = by_id.get(rec["statement_id"])
            if stmt is None:
                raise CliError(f"unknown statement id {rec['statement_id']!r}")
            try:
                fixed = pipeline.repair_proof(stmt, rec["proof"], backend,
                                              verifier, cfg)
                fh.write(json.dumps({"statement_id": stmt.id, "proof": fixed,
                                     "repaired": True}) + "\n")
                repaired += 1
            except ProvekitError as exc:
                fh.write(json.dumps({"statement_id": stmt.id, "proof": None,
                                     "repaired": False, "error": str(exc)}) + "\n")
    print(f"repaired {repaired}/{len(proofs)} proofs -> {args.out}")
    return 0


def cmd_synthesize(args) -> int:
    corpus = _load_corpus(args.corpus)
    solved_ids = set()
    if args.solved:
        solved_ids = set(json.loads(Path(args.solved).read_text(encoding="utf-8")))
    problems = [(s, s.id in solved_ids) for s in corpus]
    if args.dry_run:
        print(json.dumps({"plan": "synthesize", "problems": len(problems),
                          "solved": len(solved_ids)}, indent=2))
        return 0
    if not args.llm_script:
        raise CliError("synthesize requires --llm-script (scripted replies file)")
    llm = synthesis.ScriptedBackend.from_file(args.llm_script)
    formalizer = (synthesis.ScriptedBackend.from_file(args.formalizer_script)
                  if args.formalizer_script else llm)
    judge = (synthesis.ScriptedBackend.from_file(args.judge_script)
             if args.judge_script else llm)
    report = synthesis.synthesize(problems, llm, formalizer, judge,
                                  ToyVerifier(), seed=args.seed or 0,
                                  audit_path=args.audit)
    statements.save_corpus(report.emitted, args.out)
    print(f"emitted {len(report.emitted)} statements to {args.out} "
          f"({len(report.failures)} per-item failures)")
    return 0


def cmd_verifier_serve(_args) -> int:
    subproc.serve()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="provekit",
        description="Proof-generation pipelines against pluggable prover/verifier backends",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="TOML config file")
        p.add_argument("--seed", type=int, help="run seed (default 0)")
        p.add_argument("--mock-script", dest="mock_script",
                       help="JSON-lines mock prover script")
        p.add_argument("--backend", choices=["mock", "http"],
                       help="prover backend (default mock)")
        p.add_argument("--verifier", choices=["builtin", "subprocess"],
                       help="verifier backend (default builtin)")
        p.add_argument("--prover-url", dest="prover_url",
                       help="HTTP prover endpoint")
        p.add_argument("--dry-run", action="store_true",
                       help="print the resolved plan without backend calls")

    p = sub.add_parser("prove", help="run a benchmark over a statement corpus")
    p.add_argument("corpus")
    p.add_argument("--n", type=int, help="samples per statement (default 32)")
    p.add_argument("--rounds", type=int, help="self-correction rounds (default 2)")
    p.add_argument("--tokens-first", dest="tokens_first", type=int,
                   help="round-0 max tokens (default 30000)")
    p.add_argument("--tokens-total", dest="tokens_total", type=int,
                   help="total tokens per sample incl. corrections (default 40000)")
    p.add_argument("--no-error-messages", dest="no_error_messages",
                   action="store_true", help="omit verifier diagnostics from prompts")
    p.add_argument("--no-prior-cot", dest="no_prior_cot", action="store_true",
                   help="omit prior chain-of-thought from prompts")
    p.add_argument("--workers", type=int, help="concurrent generations (default 8)")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--resume", action="store_true",
                   help="skip samples already recorded in the run directory")
    add_common(p)
    p.set_defaults(func=cmd_prove)

    p = sub.add_parser("stats", help="print pass@k tables for one or more runs")
    p.add_argument("run_dir", nargs="+")
    p.add_argument("--k", help="comma-separated k values (default: all recorded)")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("negate", help="negate every statement in a corpus")
    p.add_argument("corpus")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_negate)

    p = sub.add_parser("average", help="interpolate two checkpoints")
    p.add_argument("--base", required=True)
    p.add_argument("--tuned", required=True)
    p.add_argument("--alpha", type=float, help="tuned-model weight in [0,1]")
    p.add_argument("--sweep", help="comma-separated alphas, e.g. 0.6,0.7,0.8,0.9")
    p.add_argument("--out", help="output file (or directory for --sweep)")
    p.set_defaults(func=cmd_average)

    p = sub.add_parser("rl-prep", help="filter rollout groups and export RL data")
    p.add_argument("--rollouts", required=True,
                   help="JSON-lines rollout groups ({input_id, task, prompt, rollouts})")
    p.add_argument("--filter", default="0,0.75",
                   help="pass-rate window lo,hi; keeps (lo, hi] (default 0,0.75)")
    p.add_argument("--batch-size", dest="batch_size", type=int,
                   help="compose a mixed batch of this size")
    p.add_argument("--mix", type=float, default=0.5,
                   help="whole-proof fraction of the batch (default 0.5)")
    p.add_argument("--seed", type=int, help="sampling seed (default 0)")
    p.add_argument("--out", required=True)
    p.add_argument("--dry-run", action="store_true")
    p.set_defaults(func=cmd_rl_prep)

    p = sub.add_parser("repair", help="repair failed proofs via subgoal extraction")
    p.add_argument("corpus")
    p.add_argument("--proofs", required=True,
                   help="JSON-lines of {statement_id, proof} failures")
    p.add_argument("--n", type=int, help="samples for the subgoal (default 1)")
    p.add_argument("--out", required=True)
    add_common(p)
    p.set_defaults(func=cmd_repair)

    p = sub.add_parser("synthesize", help="informal scaffolded statement synthesis")
    p.add_argument("corpus")
    p.add_argument("--solved", help="JSON list of solved statement ids")
    p.add_argument("--llm-script", dest="llm_script",
                   help="scripted replies for the variant-generation LLM")
    p.add_argument("--formalizer-script", dest="formalizer_script")
    p.add_argument("--judge-script", dest="judge_script")
    p.add_argument("--seed", type=int)
    p.add_argument("--audit", help="audit-trail JSON-lines output")
    p.add_argument("--out", required=True)
    p.add_argument("--dry-run", action="store_true")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("verifier-serve",
                       help="serve the builtin verifier over the wire protocol")
    p.set_defaults(func=cmd_verifier_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ProvekitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
