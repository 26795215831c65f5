"""Coverage tables and QQ data for the two-dimensional example.

    python scripts/reproduce_two_dim.py [--replications 200] [--out results/two_dim]
"""

import argparse
import dataclasses
from pathlib import Path

from sviconf.harness import load_config, run_replications, write_outputs

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "two_dim.yaml"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--replications", type=int)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default="results/two_dim")
    args = ap.parse_args()

    cfg = load_config(CONFIG)
    if args.replications:
        cfg = dataclasses.replace(cfg, replications=args.replications)
    res = run_replications(cfg, threads=args.threads)
    write_outputs(res, args.out)

    R = cfg.replications
    for row in res.coverage:
        print(f"n={row.n:3d} level={1 - row.alpha:.2f}  region {row.region}/{R}  "
              f"simultaneous {row.simultaneous}/{R}  individual {row.individual}")
    for n, qq in res.qq.items():
        print(f"n={n:3d} QQ slope {qq.slope():.3f}")
    for alpha, j, cov, cond, _ in res.limiting:
        print(f"limit level={1 - alpha:.2f} z{j + 1}: {cov:.4f} ({cond})")


if __name__ == "__main__":
    main()
