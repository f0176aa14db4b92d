#!/usr/bin/env python3
"""Generate a toy statement corpus plus a matching mock-prover script.

The corpus is solvable inside the builtin verifier; the script controls which
statements the mock backend solves at round 0, which become fixable in
correction rounds, and which vary per sample.

Usage:
    python scripts/make_toy_corpus.py --n 50 --out data/toy
"""

import argparse
from pathlib import Path

from provekit.statements import save_corpus
from provekit.toydata import make_corpus, write_mock_script


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=50, help="statement count")
    parser.add_argument("--solved-frac", type=float, default=0.4)
    parser.add_argument("--fixable-frac", type=float, default=0.3)
    parser.add_argument("--flaky-frac", type=float, default=0.0,
                        help="fraction of solved statements with per-sample "
                             "coin flips")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True,
                        help="output directory for corpus.jsonl + script.jsonl")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    statements, entries = make_corpus(
        args.n, solved_frac=args.solved_frac, fixable_frac=args.fixable_frac,
        flaky_frac=args.flaky_frac, seed=args.seed)
    save_corpus(statements, out / "corpus.jsonl")
    write_mock_script(entries, out / "script.jsonl")
    print(f"wrote {len(statements)} statements and {len(entries)} script "
          f"entries under {out}")


if __name__ == "__main__":
    main()
