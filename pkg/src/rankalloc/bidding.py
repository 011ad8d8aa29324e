"""Bid features and the heuristic bidder family."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .domain import (
    BidFeatures,
    ConfigError,
    MachineState,
    ResourceState,
    TaskSpec,
    processing_time,
    queueing_time,
)


@dataclass(frozen=True)
class HeuristicWeights:
    alpha: float = 1.0
    beta: float = 1.0
    delta: float = 2.0
    eta: float = 0.5
    lam: float = 1.0
    gamma1: float = 10.0
    psi: float = 1.0
    # None means the linear default w(pi) = pi
    priority_weight: Optional[dict] = field(default=None, hash=False)

    def __post_init__(self):
        for name in ("alpha", "beta", "delta", "eta", "lam", "gamma1", "psi"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ConfigError(f"weight {name} must be finite and >= 0, got {v}")
        if self.priority_weight is not None:
            items = sorted(self.priority_weight.items())
            if any(w <= 0 for _, w in items):
                raise ConfigError("priority weights must be positive")
            if any(b[1] <= a[1] for a, b in zip(items, items[1:])):
                raise ConfigError("priority weights must strictly increase with priority")

    def w(self, priority: int) -> float:
        if self.priority_weight is None:
            if priority <= 0:
                raise ConfigError("linear priority weight needs positive priority levels")
            return float(priority)
        return float(self.priority_weight[priority])


def features(t: float, task: TaskSpec, machine: MachineState, resource: ResourceState) -> BidFeatures:
    p = processing_time(task, machine.spec)
    q = queueing_time(machine, t)
    return BidFeatures(
        q=q,
        p=p,
        slack=task.deadline - (t + q + p),
        load=machine.load,
        chi=int(task.needs_resource),
        u=resource.contention,
        priority=task.priority,
        speed=machine.spec.speed,
        energy_rate=machine.spec.energy_rate,
    )


# Feature-level forms; the public (t, task, machine) forms below delegate here.

def _b0(x: BidFeatures, wts: HeuristicWeights) -> float:
    return wts.alpha * x.q + wts.beta * x.p


def _urgency(x: BidFeatures, wts: HeuristicWeights) -> float:
    w = wts.w(x.priority)
    if x.slack <= 0:
        return w * wts.gamma1
    return w / (x.slack + 1.0)


def _b1(x: BidFeatures, wts: HeuristicWeights) -> float:
    return _b0(x, wts) + wts.delta * _urgency(x, wts) + wts.eta * x.load


def _penalty(x: BidFeatures, wts: HeuristicWeights) -> float:
    return wts.lam * x.chi * x.u


def _b2(x: BidFeatures, wts: HeuristicWeights) -> float:
    return _b1(x, wts) + _penalty(x, wts)


def bid_b0(t, task, machine, wts: HeuristicWeights) -> float:
    q = queueing_time(machine, t)
    return wts.alpha * q + wts.beta * processing_time(task, machine.spec)


def urgency(t, task, machine, wts: HeuristicWeights) -> float:
    return _urgency(features(t, task, machine, ResourceState()), wts)


def bid_b1(t, task, machine, wts: HeuristicWeights) -> float:
    return _b1(features(t, task, machine, ResourceState()), wts)


def resource_penalty(task: TaskSpec, resource: ResourceState, wts: HeuristicWeights) -> float:
    return wts.lam * int(task.needs_resource) * resource.contention


def bid_b2(t, task, machine, resource, wts: HeuristicWeights) -> float:
    return _b2(features(t, task, machine, resource), wts)


class Bidder:
    """Base bidder; subclasses override ``bid`` and optionally the hooks.

    ``bid`` sees one machine's state, the task, and the shared resource
    state; it never receives other machines.
    """

    name = "bidder"

    def bid(self, t: float, task: TaskSpec, machine: MachineState, resource: ResourceState) -> float:
        raise NotImplementedError

    def on_auction(self, entry) -> None:
        """Called once per assigned task with the logged auction."""

    def observe(self, record, entry) -> None:
        """Called when the winner of ``entry`` completes the task."""

    def maybe_train(self, clock: float) -> None:
        """Called at each arrival before bidding."""


class HeuristicBidder(Bidder):
    _forms = {"b0": _b0, "b1": _b1, "b2": _b2}

    def __init__(self, level: str = "b2", weights: Optional[HeuristicWeights] = None):
        if level not in self._forms:
            raise ValueError(f"unknown heuristic level {level!r}")
        self.level = level
        self.weights = weights or HeuristicWeights()
        self.name = f"heuristic_{level}"
        self._form = self._forms[level]

    def bid(self, t, task, machine, resource):
        return self._form(features(t, task, machine, resource), self.weights)
