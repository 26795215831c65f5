"""Limiting individual coverage for the two-dimensional example at z0 = 0.

Prints the selection matrices, their covariances and a Monte Carlo
estimate of what the individual intervals cover as n grows.
"""

import argparse

import numpy as np

from sviconf.box import BoxSet
from sviconf.inference import (
    coherent_orientation,
    independence_condition,
    limiting_coverages,
    limiting_law,
)
from sviconf.model import true_map, two_dim_example
from sviconf.numerics import RngStream


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=10_000_000)
    ap.add_argument("--seed", type=int, default=20140101)
    ap.add_argument("--alpha", type=float, default=0.1)
    args = ap.parse_args()

    model = two_dim_example()
    law = limiting_law(true_map(model).jacobian, model.covariance_at([0, 0]), BoxSet.nonnegative_orthant(2), [0, 0])
    np.set_printoptions(precision=4, suppress=True)
    for cell, M, C in zip(law.cells, law.M, law.C):
        print(f"cell {cell}\n M =\n{M}\n C =\n{C}")
    print("coherently oriented:", coherent_orientation(law))
    print("known sufficient condition:", independence_condition(law) or "none")
    cov = limiting_coverages(law, args.alpha, args.samples, RngStream(args.seed))
    print(f"limiting individual coverage at level {1 - args.alpha:.2f}: {cov}")


if __name__ == "__main__":
    main()
