"""Per-run objectives, seed aggregation and seed-paired comparisons."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

METRICS = ("completed", "avg_delay", "misses", "energy")
# Direction in which a metric improves.
HIGHER_IS_BETTER = {"completed": True, "avg_delay": False, "misses": False, "energy": False}

RUN_COLUMNS = ("scenario", "bidder", "seed", "completed", "avg_delay", "misses", "energy", "unfinished")
AGG_COLUMNS = ("scenario", "bidder", "n", "completed_mean", "completed_std", "delay_mean", "delay_std",
               "misses_mean", "misses_std", "energy_mean", "energy_std")
PAIRED_COLUMNS = ("scenario", "seed", "metric", "value_a", "value_b", "delta")


@dataclass(frozen=True)
class RunMetrics:
    completed: int
    avg_delay: float
    misses: int
    energy: float
    unfinished: int
    seed: int = 0
    scenario: str = ""
    bidder: str = ""
    delay_defined: bool = True


@dataclass(frozen=True)
class AggregateRow:
    scenario: str
    bidder: str
    n: int
    mean: dict
    std: dict


def run_metrics(outcome, fleet=None, scenario: str = "", bidder: str = "", seed: int = 0) -> RunMetrics:
    """Delay, misses and energy restricted to tasks completed before the horizon."""
    fleet = fleet if fleet is not None else outcome.machines
    comps = outcome.completions
    n = len(comps)
    per_machine = {}
    for r in comps:
        per_machine.setdefault(r.machine_id, []).append(r.proc_time)
    rate = {m.id: m.energy_rate for m in fleet}
    energy = sum(rate[m] * sum(ps) for m, ps in sorted(per_machine.items()))
    return RunMetrics(
        completed=n,
        avg_delay=sum(r.delay for r in comps) / n if n else 0.0,
        misses=sum(1 for r in comps if r.delay > 0),
        energy=energy,
        unfinished=outcome.unfinished,
        seed=seed,
        scenario=scenario,
        bidder=bidder,
        delay_defined=n > 0,
    )


def mean_std(values) -> tuple:
    """Mean and sample (n - 1) standard deviation, exactly rounded sums."""
    values = [float(v) for v in values]
    n = len(values)
    if n < 2:
        raise ValueError("sample std needs at least two values")
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)


def aggregate(rows) -> list:
    cells = {}
    for r in rows:
        cells.setdefault((r.scenario, r.bidder), []).append(r)
    out = []
    for (scenario, bidder), runs in cells.items():
        if len(runs) < 2:
            raise ValueError(f"cell ({scenario}, {bidder}) has a single seed; std undefined")
        mean, std = {}, {}
        for k in METRICS:
            mean[k], std[k] = mean_std(getattr(r, k) for r in runs)
        out.append(AggregateRow(scenario, bidder, len(runs), mean, std))
    return out


def pooled_std(a: float, b: float) -> float:
    return math.sqrt((a * a + b * b) / 2.0)


def paired_deltas(a_runs, b_runs, metrics=METRICS):
    """Seed-matched ``b - a`` differences.

    Returns ``(rows, improved)`` where rows are ``(seed, metric, a, b, delta)``
    and ``improved[metric]`` is the fraction of seeds on which b is strictly
    better than a.
    """
    a_by = {r.seed: r for r in a_runs}
    b_by = {r.seed: r for r in b_runs}
    if set(a_by) != set(b_by) or len(a_by) != len(list(a_runs)):
        raise ValueError("paired comparison needs identical, unique seed sets")
    seeds = sorted(a_by)
    rows = []
    improved = {}
    for k in metrics:
        better = 0
        for s in seeds:
            va, vb = getattr(a_by[s], k), getattr(b_by[s], k)
            d = vb - va
            rows.append((s, k, va, vb, d))
            if (d > 0) if HIGHER_IS_BETTER.get(k, False) else (d < 0):
                better += 1
        improved[k] = better / len(seeds) if seeds else 0.0
    return rows, improved


def write_runs(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(RUN_COLUMNS)
        for r in rows:
            w.writerow([r.scenario, r.bidder, r.seed, r.completed, repr(r.avg_delay), r.misses,
                        repr(r.energy), r.unfinished])


def read_runs(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            RunMetrics(completed=int(d["completed"]), avg_delay=float(d["avg_delay"]),
                       misses=int(d["misses"]), energy=float(d["energy"]),
                       unfinished=int(d["unfinished"]), seed=int(d["seed"]),
                       scenario=d["scenario"], bidder=d["bidder"], delay_defined=int(d["completed"]) > 0)
            for d in csv.DictReader(fh)
        ]


def write_aggregate(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(AGG_COLUMNS)
        for a in rows:
            vals = []
            for k in METRICS:
                vals += [repr(a.mean[k]), repr(a.std[k])]
            w.writerow([a.scenario, a.bidder, a.n] + vals)


def write_paired(scenario_rows, path) -> None:
    """``scenario_rows`` maps scenario name to ``paired_deltas`` rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(PAIRED_COLUMNS)
        for scenario, rows in scenario_rows.items():
            for seed, metric, va, vb, d in rows:
                w.writerow([scenario, seed, metric, repr(float(va)), repr(float(vb)), repr(float(d))])
