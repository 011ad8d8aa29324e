"""Scenario x bidder x seed sweeps and their output files."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import replace
from pathlib import Path

from . import __version__, engine, metrics
from .bidding import HeuristicBidder, HeuristicWeights
from .learner import RankingBidder, RegressionBidder, TrainConfig, write_training_curve
from .workload import FleetConfig, WorkloadConfig, generate_fleet, generate_tasks, write_tasks_csv

log = logging.getLogger(__name__)

BIDDERS = ("heuristic_b0", "heuristic_b1", "heuristic_b2", "regression", "ranking")


def make_bidder(name: str, weights: HeuristicWeights, train: TrainConfig, seed: int, n_machines: int):
    if name.startswith("heuristic_"):
        return HeuristicBidder(name.split("_", 1)[1], weights)
    if name == "ranking":
        return RankingBidder(weights, train, seed, n_machines)
    if name == "regression":
        return RegressionBidder(weights, train, seed, n_machines)
    raise ValueError(f"unknown bidder {name!r}")


def scenario_inputs(scenario: WorkloadConfig, fleet_cfg: FleetConfig, seed: int):
    """Workload and fleet for ``(scenario, seed)``; independent of the bidder."""
    wl = scenario.with_seed(seed)
    tasks = generate_tasks(wl)
    fleet = generate_fleet(replace(fleet_cfg, type_count=scenario.type_count), seed=seed)
    return tasks, fleet


def run_cell(scenario_name: str, scenario: WorkloadConfig, fleet_cfg: FleetConfig, bidder_name: str,
             weights: HeuristicWeights, train: TrainConfig, seed: int, dump_dir=None):
    tasks, fleet = scenario_inputs(scenario, fleet_cfg, seed)
    bidder = make_bidder(bidder_name, weights, train, seed, len(fleet))
    outcome = engine.run(tasks, fleet, bidder, scenario.horizon)
    if dump_dir is not None:
        d = Path(dump_dir) / scenario_name / bidder_name
        d.mkdir(parents=True, exist_ok=True)
        write_tasks_csv(tasks, d / f"workload_seed{seed}.csv")
        engine.write_assignment_log(outcome.assignment_log, d / f"assignments_seed{seed}.csv")
        engine.write_completions(outcome.completions, d / f"completions_seed{seed}.csv")
        if hasattr(bidder, "curve"):
            write_training_curve(bidder.curve, d / f"training_seed{seed}.csv")
            if bidder.trained:
                from .learner.network import dumps
                (d / f"model_seed{seed}.txt").write_text(dumps(bidder.estimator.params_))
    return metrics.run_metrics(outcome, fleet, scenario_name, bidder_name, seed), outcome


class SweepError(RuntimeError):
    """A cell failed; partial outputs and an incomplete manifest were written."""


def _cell_job(args):
    name, wl, fleet_cfg, bidder, weights, train, seed, dump_dir = args
    row, _ = run_cell(name, wl, fleet_cfg, bidder, weights, train, seed, dump_dir)
    return row


def cells(cfg):
    """Sweep cells in output order: scenario, then bidder, then seed."""
    return [(name, wl, cfg.fleet, bidder, cfg.weights, cfg.train, seed)
            for name, wl in cfg.scenarios.items() for bidder in cfg.bidders for seed in cfg.seeds]


def write_manifest(cfg, out_dir, complete, files, error=None, cells_done=0, cells_total=0) -> None:
    man = {
        "software": "rankalloc",
        "version": __version__,
        "config_hash": cfg.hash(),
        "complete": complete,
        "cells_done": cells_done,
        "cells_total": cells_total,
        "paired": {"a": cfg.paired[0], "b": cfg.paired[1]},
        "files": sorted(files),
    }
    if error is not None:
        man["error"] = error
    Path(out_dir, "manifest.json").write_text(json.dumps(man, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def paired_rows(runs, a: str, b: str) -> dict:
    """Scenario name -> ``paired_deltas`` rows for bidders ``a`` and ``b``."""
    out = {}
    for scenario in dict.fromkeys(r.scenario for r in runs):
        ra = [r for r in runs if r.scenario == scenario and r.bidder == a]
        rb = [r for r in runs if r.scenario == scenario and r.bidder == b]
        if ra and rb:
            out[scenario] = metrics.paired_deltas(ra, rb)[0]
    return out


def run_experiment(cfg, out_dir, dump_runs: bool = False) -> list:
    """Run every cell of ``cfg`` and write all outputs into ``out_dir``.

    Returns the run rows. On a failing cell the rows finished so far are
    written, the manifest is marked incomplete and ``SweepError`` is raised.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dump_dir = out_dir / "runs" if dump_runs else None
    jobs = [c + (dump_dir,) for c in cells(cfg)]
    rows = []
    try:
        if cfg.jobs > 1:
            from concurrent.futures import ProcessPoolExecutor

            with ProcessPoolExecutor(cfg.jobs) as pool:
                for row in pool.map(_cell_job, jobs):
                    rows.append(row)
        else:
            for job in jobs:
                rows.append(_cell_job(job))
    except Exception as exc:
        metrics.write_runs(rows, out_dir / "runs.csv")
        err = f"{type(exc).__name__}: {exc}"
        write_manifest(cfg, out_dir, False, ["runs.csv"], err, len(rows), len(jobs))
        raise SweepError(err) from exc

    files = write_outputs(rows, out_dir, cfg.paired, list(cfg.scenarios), list(cfg.bidders), cfg.charts)
    write_manifest(cfg, out_dir, True, files, None, len(rows), len(jobs))
    return rows


def write_outputs(rows, out_dir, paired, scenarios, bidders, charts: bool) -> list:
    out_dir = Path(out_dir)
    metrics.write_runs(rows, out_dir / "runs.csv")
    files = ["runs.csv"]
    if len({r.seed for r in rows}) >= 2:
        metrics.write_aggregate(metrics.aggregate(rows), out_dir / "aggregate.csv")
        files.append("aggregate.csv")
    else:
        log.warning("a single seed per cell: aggregate.csv skipped (sample std undefined)")
    metrics.write_paired(paired_rows(rows, *paired), out_dir / "paired.csv")
    files.append("paired.csv")
    return files + emit_figures(rows, out_dir, paired, scenarios, bidders, charts)


DIST_COLUMNS = ("scenario", "bidder", "metric", "seed", "value")
SLOPE_COLUMNS = ("scenario", "metric", "seed", "bidder_a", "value_a", "bidder_b", "value_b")
TRADEOFF_COLUMNS = ("scenario", "bidder", "energy_mean", "delay_mean", "arrow_to_energy", "arrow_to_delay")


def _write(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _num(v):
    return repr(float(v)) if isinstance(v, float) else v


def emit_figures(runs, out_dir, paired=("heuristic_b2", "ranking"), scenarios=None, bidders=None,
                 charts: bool = False) -> list:
    """Plot-ready CSVs for the distribution, slope and trade-off views.

    The arrow in ``tradeoff.csv`` starts at ``paired[0]`` and ends at
    ``paired[1]``; it is stored on the row of ``paired[0]``.
    """
    out_dir = Path(out_dir)
    scenarios = scenarios or list(dict.fromkeys(r.scenario for r in runs))
    bidders = bidders or list(dict.fromkeys(r.bidder for r in runs))
    a, b = paired

    _write(out_dir / "distribution.csv", DIST_COLUMNS,
           [(r.scenario, r.bidder, k, r.seed, _num(getattr(r, k))) for r in runs for k in metrics.METRICS])

    slope = []
    for scenario, rows in paired_rows(runs, a, b).items():
        for seed, k, va, vb, _ in sorted(rows, key=lambda x: (metrics.METRICS.index(x[1]), x[0])):
            slope.append((scenario, k, seed, a, _num(float(va)), b, _num(float(vb))))
    _write(out_dir / "slope.csv", SLOPE_COLUMNS, slope)

    means = {}
    for s in scenarios:
        for bd in bidders:
            sel = [r for r in runs if r.scenario == s and r.bidder == bd]
            if sel:
                means[s, bd] = (math.fsum(r.energy for r in sel) / len(sel),
                                math.fsum(r.avg_delay for r in sel) / len(sel))
    trade = []
    for (s, bd), (e, d) in means.items():
        to = means.get((s, b)) if bd == a else None
        trade.append((s, bd, _num(e), _num(d), _num(to[0]) if to else "", _num(to[1]) if to else ""))
    _write(out_dir / "tradeoff.csv", TRADEOFF_COLUMNS, trade)

    files = ["distribution.csv", "slope.csv", "tradeoff.csv"]
    if charts:
        try:
            from . import charts as charts_mod

            files += charts_mod.render(runs, means, slope, out_dir, paired)
        except Exception as exc:  # images are a convenience only
            log.warning("chart rendering skipped: %s", exc)
    return files
