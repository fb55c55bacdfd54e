"""nodalrad command line: gen, analyze, scan, verify.

Exit codes: 0 success, 1 a check failed, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from .config import RunConfig
from .pipeline import StageError, cmd_analyze, cmd_gen, cmd_scan, POINTWISE

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration (JSON)")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--jobs", type=int, help="concurrent analyses (overrides the config)")
    common.add_argument("--seed-override", type=int, help="first seed of every eigenvalue (overrides seed_base)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="nodalrad", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("gen", parents=[common], help="write seeded eigenfunction spec files")
    a = sub.add_parser("analyze", parents=[common], help="analyse one spec file")
    a.add_argument("spec", help="eigenfunction spec file (JSON)")
    sub.add_parser("scan", parents=[common], help="generate, analyse and fit the whole ensemble")
    sub.add_parser("verify", parents=[common], help="run the closed-form fixture suite")
    return p


def _load_config(args) -> RunConfig:
    if args.config is None:
        raise ValueError("--config is required")
    cfg = RunConfig.load(args.config)
    changes = {}
    if args.out is not None:
        changes["out_dir"] = args.out
    if args.jobs is not None:
        changes["jobs"] = args.jobs
    if args.seed_override is not None:
        changes["seed_base"] = args.seed_override
    return replace(cfg, **changes) if changes else cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")

    if args.command == "verify":
        from .fixtures import run_fixtures
        results = run_fixtures()
        for name, ok, detail in results:
            print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_FAIL

    try:
        cfg = _load_config(args)
    except (OSError, ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        if args.command == "gen":
            for path in cmd_gen(cfg):
                print(path)
            return EXIT_OK
        if args.command == "analyze":
            analysis = cmd_analyze(args.spec, cfg)
            report = analysis.report
            print(json.dumps({"spec": report.spec_name, "checks": report.checks}, sort_keys=True))
            return EXIT_OK if all(report.checks.get(k, False) for k in POINTWISE) else EXIT_FAIL
        if args.command == "scan":
            return cmd_scan(cfg)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
