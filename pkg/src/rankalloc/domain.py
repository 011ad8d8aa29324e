"""Core value types for tasks, machines and their runtime state."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional


class CompatibilityError(ValueError):
    """Raised when a task type is not processable by a machine."""


class ConfigError(ValueError):
    """Raised for invalid configuration values."""


@dataclass(frozen=True)
class TaskSpec:
    id: int
    arrival: float
    task_type: int
    workload: float
    deadline: float
    priority: int
    needs_resource: bool

    def __post_init__(self):
        if not (self.arrival >= 0 and math.isfinite(self.arrival)):
            raise ValueError(f"task {self.id}: arrival must be >= 0, got {self.arrival}")
        if not self.workload > 0:
            raise ValueError(f"task {self.id}: workload must be > 0, got {self.workload}")
        if not self.deadline > self.arrival:
            raise ValueError(f"task {self.id}: deadline {self.deadline} not after arrival {self.arrival}")
        if self.task_type < 0:
            raise ValueError(f"task {self.id}: negative task type")


@dataclass(frozen=True)
class MachineSpec:
    id: int
    capabilities: frozenset
    speed: float
    energy_rate: float

    def __post_init__(self):
        object.__setattr__(self, "capabilities", frozenset(self.capabilities))
        if not self.capabilities:
            raise ValueError(f"machine {self.id}: empty capability set")
        if not self.speed > 0:
            raise ValueError(f"machine {self.id}: speed must be > 0")
        if not self.energy_rate > 0:
            raise ValueError(f"machine {self.id}: energy rate must be > 0")

    def accepts(self, task: TaskSpec) -> bool:
        return task.task_type in self.capabilities


@dataclass(frozen=True)
class QueueEntry:
    task: TaskSpec
    proc_time: float


@dataclass
class MachineState:
    """Mutable per-machine state.

    ``blocked`` marks a free machine whose head task is waiting for the
    shared resource; that task stays at the head of ``queue`` until granted.
    """

    spec: MachineSpec
    queue: list = field(default_factory=list)
    busy: bool = False
    in_service: Optional[QueueEntry] = None
    service_start: float = 0.0
    service_end: float = 0.0
    blocked: bool = False

    @property
    def load(self) -> int:
        return len(self.queue) + (1 if self.busy else 0)

    def check(self):
        assert (self.in_service is not None) == self.busy, "in_service iff busy"
        assert not (self.busy and self.blocked), "busy machine cannot be blocked"
        if self.blocked:
            assert self.queue and self.queue[0].task.needs_resource


@dataclass
class ResourceState:
    holder: Optional[int] = None
    waiters: list = field(default_factory=list)

    @property
    def contention(self) -> int:
        return len(self.waiters) + (1 if self.holder is not None else 0)


@dataclass(frozen=True)
class BidFeatures:
    q: float
    p: float
    slack: float
    load: int
    chi: int
    u: int
    priority: int
    speed: float
    energy_rate: float

    NAMES = ("q", "p", "slack", "load", "chi", "u", "priority", "speed", "energy_rate")

    def as_tuple(self) -> tuple:
        return (self.q, self.p, self.slack, float(self.load), float(self.chi),
                float(self.u), float(self.priority), self.speed, self.energy_rate)


@dataclass(frozen=True)
class CompletionRecord:
    task_id: int
    machine_id: int
    completion: float
    delay: float
    missed: bool
    proc_time: float

    @classmethod
    def from_times(cls, task: TaskSpec, machine_id: int, completion: float, proc_time: float):
        delay = max(0.0, completion - task.deadline)
        return cls(task.id, machine_id, completion, delay, delay > 0, proc_time)


def processing_time(task: TaskSpec, machine: MachineSpec) -> float:
    if not machine.accepts(task):
        raise CompatibilityError(
            f"task {task.id} (type {task.task_type}) incompatible with machine {machine.id}"
        )
    return task.workload / machine.speed


def queueing_time(m: MachineState, t: float) -> float:
    """Remaining service of the running task plus full processing of the queue."""
    q = 0.0
    if m.busy:
        q += max(0.0, m.service_end - t)
    for entry in m.queue:
        q += entry.proc_time
    return q


def estimated_completion(t: float, task: TaskSpec, m: MachineState) -> float:
    return t + queueing_time(m, t) + processing_time(task, m.spec)


def slack(t: float, task: TaskSpec, m: MachineState) -> float:
    return task.deadline - estimated_completion(t, task, m)
