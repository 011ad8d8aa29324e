"""Command-line entry point.

Exit codes: 0 success, 1 config error, 2 runtime error, 3 oracle mismatch.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__, config, experiment, metrics, oracle
from .domain import ConfigError

OUT_ENV = "RANKALLOC_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_ORACLE = 0, 1, 2, 3

log = logging.getLogger("rankalloc")


def parse_seeds(text: str) -> tuple:
    """``"30"`` -> 0..29, ``"5-9"`` -> 5..9, ``"1,4,7"`` -> those seeds."""
    try:
        if "," in text:
            seeds = tuple(int(s) for s in text.split(",") if s.strip())
        elif "-" in text.strip("-"):
            lo, hi = text.split("-", 1)
            seeds = tuple(range(int(lo), int(hi) + 1))
        else:
            seeds = tuple(range(int(text)))
    except ValueError:
        raise ConfigError(f"--seeds: cannot parse {text!r}; use N, LO-HI or a,b,c") from None
    if not seeds:
        raise ConfigError(f"--seeds: {text!r} selects no seeds")
    return seeds


def effective_config(args) -> config.ExperimentConfig:
    cfg = config.load(args.config) if args.config else config.ExperimentConfig()
    changes = {}
    if getattr(args, "seeds", None):
        changes["seeds"] = parse_seeds(args.seeds)
    if getattr(args, "scenario", None):
        missing = [s for s in args.scenario if s not in cfg.scenarios]
        if missing:
            raise ConfigError(f"--scenario: unknown {missing[0]!r}; configured: {', '.join(cfg.scenarios)}")
        changes["scenarios"] = {s: cfg.scenarios[s] for s in args.scenario}
    if getattr(args, "bidder", None):
        changes["bidders"] = tuple(dict.fromkeys(args.bidder))
    if getattr(args, "jobs", None):
        changes["jobs"] = args.jobs
    if getattr(args, "no_charts", False):
        changes["charts"] = False
    out = getattr(args, "out", None) or os.environ.get(OUT_ENV)
    if out:
        changes["output_dir"] = out
    return config.with_overrides(cfg, **changes) if changes else cfg


def cmd_run(args) -> int:
    cfg = effective_config(args)
    if args.print_defaults:
        sys.stdout.write(config.dumps(cfg))
        return EXIT_OK
    n = len(cfg.scenarios) * len(cfg.bidders) * len(cfg.seeds)
    log.info("running %d cells into %s", n, cfg.output_dir)
    try:
        experiment.run_experiment(cfg, cfg.output_dir, dump_runs=args.dump_runs)
    except experiment.SweepError as exc:
        log.error("sweep failed, partial outputs kept in %s: %s", cfg.output_dir, exc)
        return EXIT_RUNTIME
    log.info("done")
    return EXIT_OK


def cmd_defaults(args) -> int:
    sys.stdout.write(config.dumps(effective_config(args)))
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = effective_config(args)
    bad = oracle.check_equivalence(args.instances, seed=args.seed, weights=cfg.weights)
    for line in bad[:20]:
        print(line)
    print(f"{args.instances - len(bad)}/{args.instances} instances agree")
    return EXIT_ORACLE if bad else EXIT_OK


def cmd_figures(args) -> int:
    out = Path(args.out or os.environ.get(OUT_ENV) or "out")
    runs_path = out / "runs.csv"
    if not runs_path.is_file():
        log.error("%s not found; run the sweep first", runs_path)
        return EXIT_RUNTIME
    runs = metrics.read_runs(runs_path)
    paired = tuple(args.paired) if args.paired else None
    if paired is None and (out / "manifest.json").is_file():
        man = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        paired = (man["paired"]["a"], man["paired"]["b"])
    experiment.emit_figures(runs, out, paired or ("heuristic_b2", "ranking"), charts=not args.no_charts)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rankalloc", description="Auction-based task allocation experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML config file (defaults apply for missing keys)")
        sp.add_argument("--seeds", help="N, LO-HI or a,b,c")
        sp.add_argument("--scenario", action="append", help="restrict to this scenario (repeatable)")
        sp.add_argument("--bidder", action="append", choices=config.BIDDER_NAMES,
                        help="restrict to this bidder (repeatable)")
        sp.add_argument("--out", help=f"output directory (overrides ${OUT_ENV} and the config)")

    r = sub.add_parser("run", help="run the scenario x bidder x seed sweep")
    common(r)
    r.add_argument("--jobs", type=int, help="worker processes")
    r.add_argument("--dump-runs", action="store_true", help="also write per-run workload, logs and models")
    r.add_argument("--no-charts", action="store_true", help="skip SVG rendering")
    r.add_argument("--print-defaults", action="store_true", help="print the effective config and exit")
    r.set_defaults(func=cmd_run)

    d = sub.add_parser("defaults", help="print the full effective config")
    common(d)
    d.set_defaults(func=cmd_defaults)

    o = sub.add_parser("oracle", help="check the engine against a brute-force enumerator")
    o.add_argument("--config")
    o.add_argument("--instances", type=int, default=200)
    o.add_argument("--seed", type=int, default=0)
    o.set_defaults(func=cmd_oracle)

    f = sub.add_parser("figures", help="re-emit figure data from an existing runs.csv")
    f.add_argument("--out", help="directory holding runs.csv")
    f.add_argument("--paired", nargs=2, metavar=("A", "B"), choices=config.BIDDER_NAMES)
    f.add_argument("--no-charts", action="store_true")
    f.set_defaults(func=cmd_figures)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
