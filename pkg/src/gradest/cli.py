"""Command-line entry point.

    gradest run <config> [--jobs N] [--out DIR] [--seed S]
    gradest validate <config>
    gradest list-manifolds

Exit status of ``run`` is 0 iff every assertion in the config's assertion
block holds (and nothing crashed).  GRADEST_OUT sets the default output
directory.
"""

from __future__ import annotations

import argparse
import sys

from .config import KNOWN_KINDS, MANIFOLD_KINDS, load_config
from .errors import ConfigError, GradestError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gradest",
        description="Numerical workbench for gradient estimates of the Poisson "
                    "equation on model Riemannian manifolds.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", help="path to a TOML or JSON config")
    p_run.add_argument("--jobs", type=int, default=1, help="parallel worker count")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override config seed")

    p_val = sub.add_parser("validate", help="parse and validate a config")
    p_val.add_argument("config", help="path to a TOML or JSON config")

    sub.add_parser("list-manifolds", help="list available manifold kinds")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "list-manifolds":
        for kind, signature in MANIFOLD_KINDS.items():
            print(f"{kind:12s} {signature}")
        return 0

    if args.command == "validate":
        try:
            cfg = load_config(args.config)
        except ConfigError as exc:
            print(f"invalid config [{exc.code}]: {exc}", file=sys.stderr)
            return 2
        print(f"ok: kind={cfg.kind} jobs={_job_count(cfg)} seed={cfg.seed}")
        return 0

    if args.command == "run":
        from .runner import run

        try:
            cfg = load_config(args.config)
        except ConfigError as exc:
            print(f"invalid config [{exc.code}]: {exc}", file=sys.stderr)
            return 2
        if args.seed is not None:
            cfg.seed = args.seed
        try:
            report = run(cfg, jobs=args.jobs, out_dir=args.out)
        except GradestError as exc:
            print(f"run failed: {exc}", file=sys.stderr)
            return 3
        for check in report.assertions:
            status = "PASS" if check["passed"] else "FAIL"
            print(f"[{status}] {check['name']} ({check['detail']})")
        n = len(report.jobs)
        print(f"{n} job(s) done; aggregates: {report.aggregates}")
        return 0 if report.all_passed else 1

    return 2


def _job_count(cfg) -> int:
    from .runner import build_jobs

    return len(build_jobs(cfg))


if __name__ == "__main__":
    sys.exit(main())
