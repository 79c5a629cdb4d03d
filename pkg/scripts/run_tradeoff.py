#!/usr/bin/env python3
"""Cost-versus-edges tradeoff: sweep the l1 penalty over sampled instances.

Writes the tradeoff CSV, the per-cell table, and one DOT file per
identified topology, which together reproduce the sparsity-evolution
figures at desk scale.
"""
import argparse
import sys

from grnnctl.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/tradeoff", help="output root")
    parser.add_argument("--count", type=int, default=5, help="instances")
    parser.add_argument("--norm-a", type=float, default=1.05)
    parser.add_argument("--lambdas", default="", help="comma list; empty for the default grid")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    inst_dir = f"{args.out}/instances"
    status = cli_main([
        "gen", "--out", inst_dir, "--count", str(args.count),
        "--norm-a", str(args.norm_a), "--seed", str(args.seed),
    ])
    sweep_args = [
        "sweep", "--instances", inst_dir, "--out", args.out,
        "--seed", str(args.seed), "--jobs", str(args.jobs),
    ]
    if args.lambdas:
        sweep_args += ["--lambdas", args.lambdas]
    return status | cli_main(sweep_args)


if __name__ == "__main__":
    sys.exit(main())
