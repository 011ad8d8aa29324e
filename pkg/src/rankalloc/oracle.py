"""Brute-force timeline enumerator used to cross-check the event engine.

No event queue: the clock jumps to the next instant at which anything can
happen (an arrival or a service end), and every rule is applied by scanning
all machines in a fixed phase order. Only tiny instances are intended.
"""

from __future__ import annotations

import numpy as np

from .bidding import HeuristicBidder, HeuristicWeights, features
from .domain import MachineSpec, MachineState, QueueEntry, ResourceState, TaskSpec
from .engine import AuctionEntry, CompletionRecord


def enumerate_timeline(tasks, fleet, bidder, horizon: float):
    """Return ``(completion time by task id, machine by task id, unassignable ids)``."""
    ids = [m.id for m in fleet]
    spec = {m.id: m for m in fleet}
    arrivals = sorted(tasks, key=lambda j: (j.arrival, j.id))
    queue = {m: [] for m in ids}
    running = {m: None for m in ids}  # (task, p, start, end)
    blocked = {m: False for m in ids}
    holder = None
    waiters = []  # (join time, task id)
    where = {}
    entries = {}
    done = {}
    unassignable = []

    def view(m):
        st = MachineState(spec[m], [QueueEntry(j, p) for j, p in queue[m]])
        if running[m] is not None:
            j, p, s, e = running[m]
            st.busy, st.in_service, st.service_start, st.service_end = True, QueueEntry(j, p), s, e
        st.blocked = blocked[m]
        return st

    def resource():
        return ResourceState(holder, [tid for _, tid in waiters])

    def start_head(m, t):
        j, p = queue[m].pop(0)
        running[m] = (j, p, t, t + p)
        blocked[m] = False

    def try_start(m, t):
        nonlocal holder
        if running[m] is not None or blocked[m] or not queue[m]:
            return
        j, _ = queue[m][0]
        if j.needs_resource:
            if holder is None:
                holder = j.id
            else:
                waiters.append((t, j.id))
                waiters.sort()
                blocked[m] = True
                return
        start_head(m, t)

    k = 0
    while True:
        nexts = [e for (_, _, _, e) in filter(None, running.values())]
        if k < len(arrivals):
            nexts.append(arrivals[k].arrival)
        if not nexts:
            break
        t = min(nexts)
        if t > horizon:
            break

        grants = []
        for m in ids:
            r = running[m]
            if r is not None and r[3] == t:
                j, p, s, e = r
                running[m] = None
                done[j.id] = e
                if j.needs_resource:
                    holder = None
                    if waiters:
                        _, nxt = waiters.pop(0)
                        holder = nxt
                        grants.append(nxt)
                bidder.observe(CompletionRecord.from_times(j, m, e, p), entries[j.id])
        for tid in sorted(grants):
            start_head(where[tid], t)
        for m in ids:
            try_start(m, t)

        while k < len(arrivals) and arrivals[k].arrival == t:
            j = arrivals[k]
            k += 1
            bidder.maybe_train(t)
            cands = [m for m in ids if j.task_type in spec[m].capabilities]
            if not cands:
                unassignable.append(j.id)
                continue
            res = resource()
            views = {m: view(m) for m in cands}
            bids = {m: float(bidder.bid(t, j, views[m], res)) for m in cands}
            win = min(cands, key=lambda m: (bids[m], m))
            entries[j.id] = AuctionEntry(j.id, t, tuple(cands), tuple(bids[m] for m in cands), win,
                                         tuple(features(t, j, views[m], res) for m in cands))
            bidder.on_auction(entries[j.id])
            queue[win].append((j, j.workload / spec[win].speed))
            where[j.id] = win
            try_start(win, t)

    return done, {tid: where[tid] for tid in where}, unassignable


def random_instance(rng: np.random.Generator, max_tasks: int = 5, max_machines: int = 3, integer_times: bool = True):
    """Tiny random instance; integer times and speeds make simultaneous events common."""
    n_types = int(rng.integers(1, 3))
    M = int(rng.integers(1, max_machines + 1))
    fleet = []
    for m in range(M):
        caps = {int(k) for k in range(n_types) if rng.random() < 0.7} or {int(rng.integers(n_types))}
        speed = float(rng.choice([0.5, 1.0, 2.0])) if integer_times else float(rng.uniform(0.5, 2.0))
        fleet.append(MachineSpec(m, frozenset(caps), speed, float(rng.uniform(1.0, 3.0))))
    tasks = []
    for j in range(int(rng.integers(1, max_tasks + 1))):
        a = float(rng.integers(0, 6)) if integer_times else float(rng.uniform(0, 6))
        rho = float(rng.integers(1, 5)) if integer_times else float(rng.uniform(0.5, 4))
        tasks.append(TaskSpec(j, a, int(rng.integers(n_types)), rho, a + float(rng.integers(1, 8)),
                              int(rng.integers(1, 4)), bool(rng.random() < 0.6)))
    return tasks, fleet


def check_equivalence(n_instances: int = 200, seed: int = 0, weights: HeuristicWeights = None,
                      horizon: float = 1e9):
    """Compare engine and enumerator on random tiny instances.

    Returns a list of mismatch descriptions (empty when all agree).
    """
    from . import engine

    weights = weights or HeuristicWeights()
    rng = np.random.default_rng(seed)
    mismatches = []
    for i in range(n_instances):
        tasks, fleet = random_instance(rng, integer_times=bool(i % 4))
        level = ("b0", "b1", "b2")[i % 3]
        out = engine.run(tasks, fleet, HeuristicBidder(level, weights), horizon)
        got = {r.task_id: r.completion for r in out.completions}
        want, _, unassignable = enumerate_timeline(tasks, fleet, HeuristicBidder(level, weights), horizon)
        if got != want or sorted(out.unassignable) != sorted(unassignable):
            mismatches.append(f"instance {i} ({level}): engine {got} vs enumerator {want}")
    return mismatches
