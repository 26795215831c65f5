"""``svi-conf`` command line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failures above
the configured failure-rate cap (or a failed fixture solve).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import __version__
from .harness import (
    ConfigParse,
    format_table,
    load_config,
    load_fixture,
    run_fixture,
    run_limiting,
    run_replications,
    write_csv,
    write_fixture_outputs,
    write_manifest,
    write_outputs,
)
from .inference import NonInvertibleDerivative, SingularSelection
from .solver import MaxIterations, SingularNewtonMatrix

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("sviconf")


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.threads is not None:
        cfg = dataclasses.replace(cfg, threads=args.threads)
    out = Path(args.out or cfg.output_dir)
    result = run_replications(cfg)
    write_outputs(result, out)
    for row in result.coverage:
        ind = " ".join(str(c) for c in row.individual)
        print(f"n={row.n:<5d} alpha={row.alpha:<5g} valid={row.valid}/{row.replications} "
              f"region={row.region} sim={row.simultaneous} ind=[{ind}]")
    for n, qq in result.qq.items():
        print(f"n={n:<5d} qq slope={qq.slope():.3f}")
    rate = result.failure_rate()
    if rate > cfg.max_failure_rate:
        log.error("failure rate %.3f exceeds cap %.3f", rate, cfg.max_failure_rate)
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_fixture(args) -> int:
    fx = load_fixture(args.fixture)
    if args.alpha:
        fx.alphas = list(args.alpha)
    try:
        fr = run_fixture(fx)
    except (MaxIterations, SingularNewtonMatrix, NonInvertibleDerivative) as exc:
        log.error("fixture failed: %s", exc)
        return EXIT_NUMERICAL
    out = Path(args.out or "fixture_out")
    write_fixture_outputs(fr, out)
    print(format_table(fr))
    return EXIT_OK


def _cmd_limiting(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.samples is not None:
        cfg = dataclasses.replace(cfg, limiting_samples=args.samples)
    try:
        rows = run_limiting(cfg)
    except SingularSelection as exc:
        log.error("%s", exc)
        return EXIT_NUMERICAL
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "limiting.csv", ["alpha", "coord", "coverage", "condition", "coherent"],
              [(a, f"z{j + 1}", c, cond, coh) for a, j, c, cond, coh in rows])
    write_manifest(out, cfg, {"limiting": "limiting.csv"})
    for a, j, c, cond, _ in rows:
        print(f"alpha={a:<5g} z{j + 1:<3d} limit={c:.4f} ({cond})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="svi-conf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="replicated coverage experiment")
    run.add_argument("config")
    run.add_argument("--out")
    run.add_argument("--seed", type=int)
    run.add_argument("--threads", type=int)
    run.set_defaults(func=_cmd_run)

    fix = sub.add_parser("fixture", help="intervals for a supplied SAA instance")
    fix.add_argument("fixture")
    fix.add_argument("--out")
    fix.add_argument("--alpha", type=float, action="append")
    fix.set_defaults(func=_cmd_fixture)

    lim = sub.add_parser("limiting", help="Monte Carlo limit of individual coverage")
    lim.add_argument("config")
    lim.add_argument("--out")
    lim.add_argument("--seed", type=int)
    lim.add_argument("--samples", type=int)
    lim.set_defaults(func=_cmd_limiting)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigParse as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
