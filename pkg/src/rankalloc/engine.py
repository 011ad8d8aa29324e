"""Discrete-event simulation of arrival, auction, queueing and service."""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass, field

from . import bidding
from .domain import (
    CompletionRecord,
    MachineState,
    QueueEntry,
    ResourceState,
    TaskSpec,
    processing_time,
)

# Tie order at equal timestamps: capacity is freed before new work claims it.
COMPLETION, GRANT, SERVICE_START, ARRIVAL = 0, 1, 2, 3
KIND_NAMES = {COMPLETION: "completion", GRANT: "grant", SERVICE_START: "service_start", ARRIVAL: "arrival"}


class BidError(ValueError):
    """A bidder returned a non-finite bid."""


@dataclass(order=True)
class Event:
    """Heap item ordered by ``(time, kind, key, seq)``.

    ``key`` is the machine id for completions and service starts and the
    task id for grants and arrivals, so simultaneous events of one kind are
    handled in id order independent of scheduling history.
    """

    time: float
    kind: int
    key: int
    seq: int
    payload: object = field(default=None, compare=False)


@dataclass(frozen=True)
class AuctionEntry:
    task_id: int
    time: float
    candidates: tuple
    bids: tuple
    winner: int
    features: tuple


@dataclass
class SimState:
    clock: float
    machines: list
    resource: ResourceState
    pending_events: list = field(default_factory=list)
    completions: list = field(default_factory=list)
    assignment_log: list = field(default_factory=list)


@dataclass
class SimOutcome:
    completions: list
    assignment_log: list
    generated: int
    unassignable: list
    machines: tuple
    energy_tally: dict
    service_intervals: dict

    @property
    def unfinished(self) -> int:
        return self.generated - len(self.completions) - len(self.unassignable)


def winner(bids: dict) -> int:
    """Lowest bid wins; equal bids go to the lowest machine id."""
    if not bids:
        raise ValueError("empty bid map")
    best_m, best_b = None, None
    for m in sorted(bids):
        b = bids[m]
        if not math.isfinite(b):
            raise BidError(f"non-finite bid {b!r} from machine {m}")
        if best_b is None or b < best_b:
            best_m, best_b = m, b
    return best_m


class Simulation:
    def __init__(self, tasks, fleet, bidder: bidding.Bidder, horizon: float, check_invariants: bool = True):
        self.tasks = list(tasks)
        self.fleet = list(fleet)
        if [m.id for m in self.fleet] != list(range(len(self.fleet))):
            raise ValueError("machine ids must be dense 0..M-1 in order")
        self.bidder = bidder
        self.horizon = horizon
        self.check_invariants = check_invariants
        self.state = SimState(0.0, [MachineState(spec) for spec in self.fleet], ResourceState())
        self._seq = 0
        self._entries = {}
        self._machine_of = {}
        self._join_time = {}
        self._task_by_id = {t.id: t for t in self.tasks}
        self.unassignable = []
        self.energy_tally = {m.id: 0.0 for m in self.fleet}
        self.service_intervals = {m.id: [] for m in self.fleet}
        for task in self.tasks:
            self.schedule(task.arrival, ARRIVAL, task.id, task)

    def schedule(self, time: float, kind: int, key: int, payload=None) -> None:
        heapq.heappush(self.state.pending_events, Event(time, kind, key, self._seq, payload))
        self._seq += 1

    def run(self) -> SimOutcome:
        events = self.state.pending_events
        while events and events[0].time <= self.horizon:
            self.advance(heapq.heappop(events))
        return SimOutcome(
            completions=self.state.completions,
            assignment_log=self.state.assignment_log,
            generated=len(self.tasks),
            unassignable=self.unassignable,
            machines=tuple(self.fleet),
            energy_tally=self.energy_tally,
            service_intervals=self.service_intervals,
        )

    def advance(self, event: Event) -> None:
        st = self.state
        assert event.time >= st.clock, "event in the past"
        st.clock = event.time
        if event.kind == ARRIVAL:
            self._on_arrival(event.payload)
        elif event.kind == SERVICE_START:
            self._on_service_start(st.machines[event.key])
        elif event.kind == COMPLETION:
            self._on_completion(st.machines[event.key])
        elif event.kind == GRANT:
            self._on_grant(event.key)
        if self.check_invariants:
            self._check()

    def _on_arrival(self, task: TaskSpec) -> None:
        st = self.state
        t = st.clock
        self.bidder.maybe_train(t)
        candidates = tuple(m.spec.id for m in st.machines if m.spec.accepts(task))
        if not candidates:
            self.unassignable.append(task.id)
            return
        bids = {m: float(self.bidder.bid(t, task, st.machines[m], st.resource)) for m in candidates}
        win = winner(bids)
        entry = AuctionEntry(
            task_id=task.id,
            time=t,
            candidates=candidates,
            bids=tuple(bids[m] for m in candidates),
            winner=win,
            features=tuple(bidding.features(t, task, st.machines[m], st.resource) for m in candidates),
        )
        st.assignment_log.append(entry)
        self._entries[task.id] = entry
        self.bidder.on_auction(entry)

        machine = st.machines[win]
        machine.queue.append(QueueEntry(task, processing_time(task, machine.spec)))
        self._machine_of[task.id] = win
        if not machine.busy and not machine.blocked:
            self.schedule(t, SERVICE_START, win)

    def _on_service_start(self, machine: MachineState) -> None:
        if machine.busy or machine.blocked or not machine.queue:
            return
        head = machine.queue[0]
        if head.task.needs_resource:
            res = self.state.resource
            if res.holder is None:
                res.holder = head.task.id
            else:
                self._join_waiters(head.task.id)
                machine.blocked = True
                return
        self._start(machine)

    def _join_waiters(self, task_id: int) -> None:
        # FIFO by join time; simultaneous joins ordered by task id
        res = self.state.resource
        t = self.state.clock
        pos = len(res.waiters)
        while pos > 0 and self._join_time[res.waiters[pos - 1]] == t and res.waiters[pos - 1] > task_id:
            pos -= 1
        res.waiters.insert(pos, task_id)
        self._join_time[task_id] = t

    def _start(self, machine: MachineState) -> None:
        entry = machine.queue.pop(0)
        t = self.state.clock
        machine.busy = True
        machine.blocked = False
        machine.in_service = entry
        machine.service_start = t
        machine.service_end = t + entry.proc_time
        self.schedule(machine.service_end, COMPLETION, machine.spec.id)

    def _on_completion(self, machine: MachineState) -> None:
        st = self.state
        entry = machine.in_service
        task = entry.task
        t = st.clock
        rec = CompletionRecord.from_times(task, machine.spec.id, machine.service_end, entry.proc_time)
        st.completions.append(rec)
        self.energy_tally[machine.spec.id] += machine.spec.energy_rate * (machine.service_end - machine.service_start)
        self.service_intervals[machine.spec.id].append((task.id, machine.service_start, machine.service_end))
        machine.busy = False
        machine.in_service = None

        if task.needs_resource:
            res = st.resource
            assert res.holder == task.id
            res.holder = None
            if res.waiters:
                nxt = res.waiters.pop(0)
                res.holder = nxt
                self.schedule(t, GRANT, nxt)
        if machine.queue:
            self.schedule(t, SERVICE_START, machine.spec.id)
        self.bidder.observe(rec, self._entries[task.id])

    def _on_grant(self, task_id: int) -> None:
        machine = self.state.machines[self._machine_of[task_id]]
        assert machine.blocked and machine.queue[0].task.id == task_id
        self._start(machine)

    def _check(self) -> None:
        res = self.state.resource
        holders = 0
        for m in self.state.machines:
            m.check()
            if m.busy and m.in_service.task.needs_resource:
                holders += 1
                assert res.holder == m.in_service.task.id
        assert holders <= 1
        if res.holder is not None:
            assert self._task_by_id[res.holder].needs_resource


def run(tasks, fleet, bidder: bidding.Bidder, horizon: float, check_invariants: bool = True) -> SimOutcome:
    return Simulation(tasks, fleet, bidder, horizon, check_invariants).run()


def write_assignment_log(log, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["task_id", "time", "candidates", "bids", "winner"])
        for e in log:
            w.writerow([e.task_id, repr(e.time), " ".join(map(str, e.candidates)),
                        " ".join(repr(b) for b in e.bids), e.winner])


def write_completions(completions, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["task_id", "machine_id", "completion", "delay", "missed"])
        for r in completions:
            w.writerow([r.task_id, r.machine_id, repr(r.completion), repr(r.delay), int(r.missed)])
