#!/usr/bin/env python3
"""Desk-scale benchmark: all controller variants on freshly sampled instances.

Generates instances, trains every variant with the default hyperparameters,
and writes the summary table plus per-variant learning curves. With the
defaults (10 instances, 750 batches) this takes a few minutes per plant
norm on one core.
"""
import argparse
import sys

from grnnctl.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/benchmark", help="output root")
    parser.add_argument("--count", type=int, default=10, help="instances per plant norm")
    parser.add_argument("--norms", default="0.995,1.05", help="comma list of plant spectral norms")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    status = 0
    for norm in (float(x) for x in args.norms.split(",") if x.strip()):
        tag = str(norm).replace(".", "p")
        inst_dir = f"{args.out}/norm_{tag}/instances"
        status |= cli_main([
            "gen", "--out", inst_dir, "--count", str(args.count),
            "--norm-a", str(norm), "--seed", str(args.seed),
        ])
        status |= cli_main([
            "benchmark", "--instances", inst_dir, "--out", f"{args.out}/norm_{tag}",
            "--seed", str(args.seed), "--jobs", str(args.jobs),
        ])
    return status


if __name__ == "__main__":
    sys.exit(main())
