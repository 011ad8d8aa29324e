import pytest
from hypothesis import given, strategies as st

from rankalloc.bidding import (
    HeuristicBidder, HeuristicWeights, bid_b0, bid_b1, bid_b2, features, resource_penalty, urgency,
)
from rankalloc.domain import ConfigError, processing_time, queueing_time, slack
from rankalloc.engine import run

from builders import machine, resource, state, task

W = HeuristicWeights()


@st.composite
def situations(draw):
    t = draw(st.floats(0, 50))
    procs = draw(st.lists(st.floats(0.1, 10), max_size=4))
    serving = draw(st.booleans())
    in_service = None
    if serving:
        start = draw(st.floats(max(0.0, t - 10), t))
        in_service = (start, t + draw(st.floats(0.01, 10)))
    spec = machine(speed=draw(st.floats(0.2, 3)), energy=draw(st.floats(0.5, 3)))
    m = state(spec, procs, in_service)
    j = task(arrival=t, rho=draw(st.floats(0.1, 10)), deadline=t + draw(st.floats(0.01, 40)),
             priority=draw(st.integers(1, 3)), chi=draw(st.booleans()))
    res = resource(draw(st.one_of(st.none(), st.integers(200, 210))), draw(st.lists(st.integers(300, 320), max_size=4)))
    return t, j, m, res


weights = st.builds(HeuristicWeights, *[st.floats(0, 5)] * 7)


def test_features_fresh_idle_machine():
    x = features(0.0, task(), state(), resource())
    assert x.q == 0 and x.load == 0
    assert len(x.as_tuple()) == 9


def test_chi_zero_ignores_contention():
    x = features(0.0, task(chi=False), state(), resource(1, [2, 3]))
    assert x.chi == 0 and x.u == 3
    assert resource_penalty(task(chi=False), resource(1, [2, 3, 4, 5, 6, 7]), W) == 0.0


@given(situations())
def test_features_match_domain_ops(s):
    t, j, m, res = s
    x = features(t, j, m, res)
    assert x.q == queueing_time(m, t)
    assert x.p == processing_time(j, m.spec)
    assert x.slack == slack(t, j, m)
    assert x.load == len(m.queue) + int(m.busy)
    assert x.u == len(res.waiters) + (res.holder is not None)


def test_b0_examples():
    assert bid_b0(0.0, task(rho=2), state(queue_procs=(3,)), W) == 5.0
    w0 = HeuristicWeights(alpha=0)
    assert bid_b0(0.0, task(), state(queue_procs=(9, 9)), w0) == bid_b0(0.0, task(), state(), w0)


def test_b0_prefers_shorter_queue_in_simulation():
    # machine 0 already has a long job, so the next equal-speed arrival goes to machine 1
    fleet = [machine(0), machine(1)]
    tasks = [task(0, 0.0, rho=8), task(1, 0.5, rho=1)]
    out = run(tasks, fleet, HeuristicBidder("b0"), 100)
    assert [e.winner for e in out.assignment_log] == [0, 1]


def test_urgency_examples():
    one = HeuristicWeights(priority_weight={1: 1.0})
    assert urgency(0.0, task(rho=4, deadline=2), state(), one) == 10.0
    assert urgency(0.0, task(rho=1, deadline=2), state(), one) == 0.5
    assert urgency(0.0, task(rho=2, deadline=2), state(), one) == 10.0


def test_b1_examples():
    assert bid_b1(0.0, task(), state(), HeuristicWeights(delta=0, eta=0)) == bid_b0(0.0, task(), state(), W)
    w = HeuristicWeights(alpha=0, beta=0, delta=0, eta=1)
    assert bid_b1(0.0, task(), state(queue_procs=(1, 1, 1), in_service=(0, 1)), w) == 4.0


def test_penalty_examples():
    assert resource_penalty(task(chi=False), resource(1, range(6)), W) == 0.0
    assert resource_penalty(task(chi=True), resource(), W) == 0.0
    assert resource_penalty(task(chi=True), resource(1, [2, 3]), W) == 3.0


def test_b2_reduces_to_b1_without_lambda():
    j, m, r = task(chi=True), state(queue_procs=(2,)), resource(5, [6])
    assert bid_b2(0.0, j, m, r, HeuristicWeights(lam=0)) == bid_b1(0.0, j, m, W)


def test_b2_increasing_in_contention():
    j, m = task(chi=True), state()
    bids = [bid_b2(0.0, j, m, resource(None if u == 0 else 1, range(2, u + 1)), W) for u in range(6)]
    assert all(a < b for a, b in zip(bids, bids[1:]))


@given(situations(), weights)
def test_bid_decomposition_exact(s, wts):
    t, j, m, res = s
    b0 = bid_b0(t, j, m, wts)
    ups = urgency(t, j, m, wts)
    b1 = bid_b1(t, j, m, wts)
    assert b1 == b0 + wts.delta * ups + wts.eta * m.load
    assert bid_b2(t, j, m, res, wts) == b1 + resource_penalty(j, res, wts)


def test_weight_validation():
    with pytest.raises(ConfigError):
        HeuristicWeights(alpha=-1)
    with pytest.raises(ConfigError):
        HeuristicWeights(priority_weight={1: 2.0, 2: 1.0})
    assert HeuristicWeights(priority_weight={1: 1.0, 2: 5.0}).w(2) == 5.0


class SpyResource:
    """Counts what a bidder reads from the resource state."""

    def __init__(self, holder, waiters):
        self.holder, self.waiters, self.reads = holder, list(waiters), 0

    @property
    def contention(self):
        self.reads += 1
        return len(self.waiters) + (self.holder is not None)


def test_bidders_read_contention():
    res = SpyResource(1, [2, 3])
    HeuristicBidder("b2").bid(0.0, task(chi=True), state(), res)
    assert res.reads == 1
