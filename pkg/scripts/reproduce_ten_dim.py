"""Coverage and average intervals for the three ten-dimensional variants.

    python scripts/reproduce_ten_dim.py [--variants 1 2 3] [--threads 4]
"""

import argparse
from pathlib import Path

import numpy as np

from sviconf.harness import load_config, run_replications, write_outputs

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--variants", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    np.set_printoptions(precision=3, suppress=True, linewidth=120)
    for v in args.variants:
        cfg = load_config(CONFIGS / f"ten_dim_{v}.yaml")
        res = run_replications(cfg, threads=args.threads)
        write_outputs(res, Path(args.out) / f"ten_dim_{v}")
        print(f"variant {v}: z0 = {res.z0}")
        for n in cfg.sample_sizes:
            row = res.row(n, 0.1)
            print(f"  n={n} simultaneous {row.simultaneous}/{row.valid}  individual {row.individual}")
            for kind in ("ind", "sim"):
                lo, hi = res.mean_intervals(n, 0.1, kind, "x")
                print(f"  mean {kind} x-intervals lo {lo}")
                print(f"  {' ' * len(kind)}                  hi {hi}")


if __name__ == "__main__":
    main()
