"""Command-line front end: run, validate, plot, list-presets.

Exit codes: 0 success, 2 configuration error, 3 resource limit, 4 an
experiment's internal check failed, 1 anything unexpected. Output directory
and worker count can also come from RCMLAB_OUTDIR / RCMLAB_WORKERS.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .environment import ConductanceLaw
from .errors import ConfigError, ResourceLimitError, ScanLimitError
from .presets import EXPERIMENTS, PRESETS, default_environment

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_RESOURCE = 3
EXIT_CHECK_FAILED = 4


def _parse_law(text: str) -> ConductanceLaw:
    """law strings look like constant:1.0, pareto:3, two_point:1,8,0.5"""
    kind, _, rest = text.partition(":")
    args = [float(x) for x in rest.split(",")] if rest else []
    builders = {
        "constant": ConductanceLaw.constant,
        "pareto": ConductanceLaw.pareto,
        "shifted_exponential": ConductanceLaw.shifted_exponential,
        "two_point": ConductanceLaw.two_point,
    }
    if kind not in builders:
        raise ConfigError(
            f"law: unknown kind {kind!r}; have {sorted(builders)}")
    try:
        return builders[kind](*args)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"law: {text!r}: {exc}") from None


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="rcmlab",
        description="Random-conductance-model experiments on a percolation lattice")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and persist results")
    val = sub.add_parser("validate", help="check a configuration and exit")
    for p in (run, val):
        p.add_argument("--config", type=Path,
                       help="JSON config file; flags override its fields")
        p.add_argument("--experiment", choices=EXPERIMENTS)
        p.add_argument("--preset", choices=sorted(PRESETS))
        p.add_argument("--dim", type=int)
        p.add_argument("--p", type=float)
        p.add_argument("--env-seed", type=int)
        p.add_argument("--law", type=str,
                       help="kind:params, e.g. constant:1 or pareto:3")
        p.add_argument("--scan-limit", type=int)
        p.add_argument("--seed", type=int, dest="run_seed",
                       help="global run seed for walk ensembles")
        p.add_argument("--outdir", type=Path)
        p.add_argument("--workers", type=int)
        p.add_argument("--param", action="append", default=[],
                       metavar="KEY=JSON",
                       help="experiment parameter override, repeatable")

    plot = sub.add_parser("plot", help="re-render SVGs from persisted CSVs")
    plot.add_argument("result_dir", type=Path)

    sub.add_parser("list-presets", help="show presets and their experiments")
    return ap


def _config_from_args(args) -> "RunConfig":
    from .experiments import RunConfig

    base: dict = {}
    if args.config:
        if not args.config.exists():
            raise ConfigError(f"config: {args.config} does not exist")
        try:
            base = json.loads(args.config.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: {args.config}: {exc}") from None
        cfg = RunConfig.from_json(base)
    else:
        envd = default_environment()
        cfg = RunConfig(experiment=args.experiment or "env-audit",
                        dim=envd["dim"], p=envd["p"], env_seed=envd["seed"],
                        law=ConductanceLaw.from_json(envd["law"]))
    if args.experiment:
        cfg.experiment = args.experiment
    if args.preset:
        cfg.preset = args.preset
    if args.dim is not None:
        cfg.dim = args.dim
    if args.p is not None:
        cfg.p = args.p
    if args.env_seed is not None:
        cfg.env_seed = args.env_seed
    if args.law:
        cfg.law = _parse_law(args.law)
    if args.scan_limit is not None:
        cfg.scan_limit = args.scan_limit
    if args.run_seed is not None:
        cfg.run_seed = args.run_seed
    outdir = args.outdir or os.environ.get("RCMLAB_OUTDIR")
    if outdir:
        cfg.outdir = Path(outdir)
    workers = args.workers if args.workers is not None \
        else os.environ.get("RCMLAB_WORKERS")
    if workers is not None:
        cfg.workers = int(workers)
    for item in args.param:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"param: {item!r} is not KEY=JSON")
        try:
            cfg.params[key] = json.loads(raw)
        except json.JSONDecodeError:
            cfg.params[key] = raw
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "list-presets":
            for name in sorted(PRESETS):
                exp_names = ", ".join(sorted(PRESETS[name]))
                print(f"{name}: {exp_names}")
            return EXIT_OK

        if args.command == "plot":
            from .plots import render_all
            try:
                written = render_all(args.result_dir)
            except FileNotFoundError as exc:
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_CONFIG
            if not written:
                print(f"error: no known CSV tables in {args.result_dir}",
                      file=sys.stderr)
                return EXIT_CONFIG
            for p in written:
                print(p)
            return EXIT_OK

        from .experiments import run_experiment, validate_config

        cfg = _config_from_args(args)
        problems = validate_config(cfg)
        if args.command == "validate":
            if problems:
                for line in problems:
                    print(f"invalid: {line}", file=sys.stderr)
                return EXIT_CONFIG
            print(json.dumps(cfg.to_json(), indent=2, sort_keys=True))
            return EXIT_OK

        if problems:
            for line in problems:
                print(f"invalid: {line}", file=sys.stderr)
            return EXIT_CONFIG
        result = run_experiment(cfg)
        print(f"wrote {len(result.files)} files to {result.outdir} "
              f"in {result.wall_time:.1f}s")
        if result.failures:
            print(f"{result.failures} internal check(s) failed",
                  file=sys.stderr)
            return EXIT_CHECK_FAILED
        return EXIT_OK

    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ResourceLimitError, ScanLimitError, MemoryError) as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except Exception as exc:  # pragma: no cover - last resort
        print(f"unexpected error: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    raise SystemExit(main())
