"""Reproduce the synthetic sparse-source separation experiment.

Generates a d=3 square Gaussian mixture of sparse-uniform sources,
then runs the online separator and the Nonnegative PCA baseline for 10
seeds each, writing per-run error trajectories and mean/std summaries
under out/sparse/. Equivalent to calling the CLI twice; kept as a script
so the full experiment is one command.

Usage: python scripts/run_sparse_experiment.py [--T 100000] [--seed 1] [--runs 10]
"""

import argparse
import sys

from bionica.cli import main as bionica_main


def run(argv):
    code = bionica_main(argv)
    if code != 0:
        sys.exit(code)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--T", type=int, default=100000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--runs", type=int, default=10)
    ap.add_argument("--outdir", default="out/sparse")
    args = ap.parse_args()

    common = ["--d", "3", "--k", "3", "--T", str(args.T), "--seed", str(args.seed)]
    run(["generate", "--outdir", args.outdir] + common)
    run(["run", "--indir", args.outdir, "--outdir", args.outdir + "/bio-nica",
         "--algo", "bio-nica", "--runs", str(args.runs)] + common)
    run(["run", "--indir", args.outdir, "--outdir", args.outdir + "/nnpca",
         "--algo", "nnpca", "--runs", str(args.runs)] + common)


if __name__ == "__main__":
    main()
