"""Separate mixed grayscale images with the online algorithm.

Mixes three equal-sized PGM images through a random 6x3 Gaussian matrix,
streams 15 shuffled epochs of the pixel samples, and writes the
recovered images plus per-image correlations under out/images/.

Usage: python scripts/run_image_experiment.py [--images a.pgm,b.pgm,c.pgm]
"""

import argparse
import sys

from bionica.cli import main as bionica_main

DEFAULT_IMAGES = ",".join(
    "data/images/texture%d.pgm" % i for i in range(3))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--images", default=DEFAULT_IMAGES,
                    help="three comma-separated PGM paths")
    ap.add_argument("--epochs", type=int, default=15)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--outdir", default="out/images")
    args = ap.parse_args()
    sys.exit(bionica_main([
        "images", "--images", args.images, "--epochs", str(args.epochs),
        "--seed", str(args.seed), "--outdir", args.outdir]))


if __name__ == "__main__":
    main()
