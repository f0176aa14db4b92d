#!/usr/bin/env python3
"""Self-correction ablation on a toy corpus.

Runs the benchmark three ways — correction rounds with error feedback,
no correction rounds, correction without error feedback — and prints the
pass@8 uplift each configuration achieves.

Usage:
    python scripts/run_correction_ablation.py --out /tmp/ablation
"""

import argparse
from pathlib import Path

from provekit import pipeline
from provekit.config import RunConfig
from provekit.prover import MockBackend
from provekit.toydata import make_corpus, write_mock_script
from provekit.verifier import ToyVerifier


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-statements", type=int, default=50)
    parser.add_argument("--n-samples", type=int, default=8)
    parser.add_argument("--seed", type=int, default=11)
    parser.add_argument("--out", required=True)
    args = parser.parse_args()

    out = Path(args.out)
    statements, entries = make_corpus(args.n_statements, solved_frac=0.4,
                                      fixable_frac=0.3, seed=7)
    script = out / "script.jsonl"
    out.mkdir(parents=True, exist_ok=True)
    write_mock_script(entries, script)

    variants = {
        "correction": dict(max_rounds=2),
        "no-correction": dict(max_rounds=0),
        "no-error-messages": dict(max_rounds=2, include_error_messages=False),
    }
    k = str(args.n_samples)
    rates = {}
    for tag, kw in variants.items():
        cfg = RunConfig(n_samples=args.n_samples, seed=args.seed, **kw)
        report = pipeline.run_benchmark(statements, cfg, MockBackend(script),
                                        ToyVerifier(), out / tag)
        rates[tag] = report.metrics["pass_at"][k]
        print(f"{tag:>20}: pass@{k} = {rates[tag]:.4f}")

    uplift = rates["correction"] - rates["no-correction"]
    erased = (rates["correction"] - rates["no-error-messages"]) / uplift \
        if uplift else float("nan")
    print(f"\ncorrection uplift: {uplift:+.4f}; "
          f"error-feedback ablation erases {erased:.0%} of it")


if __name__ == "__main__":
    main()
