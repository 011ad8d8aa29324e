"""Seeded generation of task streams and machine fleets."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .domain import ConfigError, MachineSpec, TaskSpec

# Sub-stream keys; each concern draws from its own PCG64 stream so that
# changing one (e.g. model init) never perturbs another (e.g. arrivals).
ARRIVALS, ATTRIBUTES, FLEET, MODEL = 0, 1, 2, 3


def stream(seed: int, key: int, *extra: int) -> np.random.Generator:
    """Independent generator for ``(seed, key, *extra)``.

    Uses ``SeedSequence`` spawn keys over PCG64, whose output is fixed
    across platforms for a given seed.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(key),) + tuple(int(e) for e in extra))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class WorkloadConfig:
    max_interarrival: float = 1.5
    rho_min: float = 2.0
    rho_max: float = 6.0
    deadline_scale: float = 2.0
    resource_prob: float = 0.4
    priority_levels: tuple = (1, 2, 3)
    type_count: int = 3
    horizon: float = 100.0
    seed: int = 0

    def validate(self) -> "WorkloadConfig":
        if not self.max_interarrival > 0:
            raise ConfigError("max_interarrival must be > 0")
        if not (self.rho_min > 0 and self.rho_max > 0):
            raise ConfigError("rho_min and rho_max must be > 0")
        if self.rho_min > self.rho_max:
            raise ConfigError(f"rho_min {self.rho_min} > rho_max {self.rho_max}")
        if not self.deadline_scale > 0:
            raise ConfigError("deadline_scale must be > 0")
        if not 0.0 <= self.resource_prob <= 1.0:
            raise ConfigError("resource_prob must lie in [0, 1]")
        if len(self.priority_levels) == 0:
            raise ConfigError("priority_levels must be nonempty")
        if self.type_count < 1:
            raise ConfigError("type_count must be >= 1")
        if not self.horizon > 0:
            raise ConfigError("horizon must be > 0")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        return self

    def with_seed(self, seed: int) -> "WorkloadConfig":
        return replace(self, seed=seed)


HIGH_LOAD = WorkloadConfig()
TIGHT_DEADLINES = replace(HIGH_LOAD, max_interarrival=3.0, deadline_scale=1.2)
PRESETS = {"HIGH_LOAD": HIGH_LOAD, "TIGHT_DEADLINES": TIGHT_DEADLINES}


CAPABILITY_RULES = ("random", "all", "round_robin")


@dataclass(frozen=True)
class FleetConfig:
    machine_count: int = 5
    speed_range: tuple = (0.8, 1.5)
    energy_range: tuple = (1.0, 3.0)
    capability_rule: str = "random"
    type_count: int = 3
    min_coverage: int = 2

    def validate(self) -> "FleetConfig":
        if self.machine_count < 2:
            raise ConfigError("machine_count must be >= 2")
        for name in ("speed_range", "energy_range"):
            lo, hi = getattr(self, name)
            if not (lo > 0 and hi > 0):
                raise ConfigError(f"{name} bounds must be > 0")
            if lo > hi:
                raise ConfigError(f"{name} lower bound {lo} > upper bound {hi}")
        if self.capability_rule not in CAPABILITY_RULES:
            raise ConfigError(f"unknown capability_rule {self.capability_rule!r}")
        if self.type_count < 1:
            raise ConfigError("type_count must be >= 1")
        if self.min_coverage > self.machine_count:
            raise ConfigError(
                f"cannot cover each type {self.min_coverage}x with {self.machine_count} machines"
            )
        return self


def generate_tasks(cfg: WorkloadConfig, arrivals_rng=None, attrs_rng=None) -> list:
    """Renewal-process arrivals with uniform inter-arrival gaps.

    Tasks arriving after ``cfg.horizon`` are not generated.
    """
    cfg.validate()
    arrivals_rng = arrivals_rng if arrivals_rng is not None else stream(cfg.seed, ARRIVALS)
    attrs_rng = attrs_rng if attrs_rng is not None else stream(cfg.seed, ATTRIBUTES)
    levels = tuple(cfg.priority_levels)

    tasks = []
    a = float(arrivals_rng.uniform(0.0, cfg.max_interarrival))
    while a <= cfg.horizon:
        rho = float(attrs_rng.uniform(cfg.rho_min, cfg.rho_max))
        kappa = int(attrs_rng.integers(cfg.type_count))
        chi = bool(attrs_rng.random() < cfg.resource_prob)
        prio = int(levels[int(attrs_rng.integers(len(levels)))])
        tasks.append(TaskSpec(
            id=len(tasks),
            arrival=a,
            task_type=kappa,
            workload=rho,
            deadline=a + cfg.deadline_scale * rho,
            priority=prio,
            needs_resource=chi,
        ))
        a = a + float(arrivals_rng.uniform(0.0, cfg.max_interarrival))
    return tasks


def _capabilities(cfg: FleetConfig, rng: np.random.Generator) -> list:
    M, K = cfg.machine_count, cfg.type_count
    if cfg.capability_rule == "all":
        return [set(range(K)) for _ in range(M)]
    if cfg.capability_rule == "round_robin":
        caps = [set() for _ in range(M)]
        slot = 0
        for k in range(K):
            for _ in range(cfg.min_coverage):
                caps[slot % M].add(k)
                slot += 1
        for m in range(M):
            if not caps[m]:
                caps[m].add(m % K)
        return caps

    caps = []
    for _ in range(M):
        size = int(rng.integers(1, K + 1))
        caps.append(set(int(k) for k in rng.choice(K, size=size, replace=False)))
    for k in range(K):
        holders = [m for m in range(M) if k in caps[m]]
        missing = cfg.min_coverage - len(holders)
        if missing > 0:
            others = [m for m in range(M) if k not in caps[m]]
            for m in rng.choice(others, size=missing, replace=False):
                caps[int(m)].add(k)
    return caps


def generate_fleet(cfg: FleetConfig, rng=None, seed: int = 0) -> list:
    """Heterogeneous machines; every task type is covered by ``min_coverage`` machines."""
    cfg.validate()
    rng = rng if rng is not None else stream(seed, FLEET)
    caps = _capabilities(cfg, rng)
    machines = []
    for m in range(cfg.machine_count):
        speed = float(rng.uniform(*cfg.speed_range))
        energy = float(rng.uniform(*cfg.energy_range))
        machines.append(MachineSpec(m, frozenset(caps[m]), speed, energy))
    return machines


TASK_COLUMNS = ("id", "arrival", "type", "rho", "deadline", "priority", "chi")


def write_tasks_csv(tasks, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TASK_COLUMNS)
        for t in tasks:
            w.writerow([t.id, repr(t.arrival), t.task_type, repr(t.workload),
                        repr(t.deadline), t.priority, int(t.needs_resource)])


def read_tasks_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            TaskSpec(int(r["id"]), float(r["arrival"]), int(r["type"]), float(r["rho"]),
                     float(r["deadline"]), int(r["priority"]), bool(int(r["chi"])))
            for r in csv.DictReader(fh)
        ]
