import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone

from rankalloc.bidding import HeuristicBidder, HeuristicWeights, bid_b2
from rankalloc.engine import run, winner
from rankalloc.learner import (
    CandidateRecord, OutcomeRegressor, PairwiseRanker, RankingBidder, RegressionBidder, TrainConfig,
    derive_preferences, network, outcome_scores, ranking_bid, regression_bid, train_round,
)
from rankalloc.learner.bidders import RunningMoments, write_training_curve
from rankalloc.learner.labels import build_pairwise_set, build_regression_set, estimation_bias
from rankalloc.workload import HIGH_LOAD, FleetConfig, generate_fleet, generate_tasks

import oracles
from builders import machine, resource, state, task


def _record(slacks, winner_idx=0, delay=None, candidates=None):
    k = len(slacks)
    feats = np.zeros((k, 9))
    feats[:, 2] = slacks
    feats[:, 1] = 1.0
    cands = tuple(candidates or range(1, k + 1))
    return CandidateRecord(0, cands, feats, cands[winner_idx], realized_delay=delay)


def _random_records(rng, n=40):
    recs = []
    for i in range(n):
        k = int(rng.integers(1, 5))
        feats = rng.normal(size=(k, 9))
        feats[:, 2] = rng.choice([-3.0, -1.0, 0.0, 2.0, 5.0], size=k)
        recs.append(CandidateRecord(i, tuple(range(k)), feats, int(rng.integers(k)),
                                    realized_delay=float(rng.choice([0.0, 0.5, 3.0]))))
    return recs


# scorer

def test_zero_head_scores_zero():
    p = network.init_params(np.random.default_rng(0))
    X = np.random.default_rng(1).normal(size=(20, 9)) * 100
    assert np.all(network.score_batch(p, X) == 0.0)


def test_score_deterministic():
    p = oracles.random_params(np.random.default_rng(2), hidden=16, latent=8)
    x = np.arange(9.0)
    assert network.score(p, x) == network.score(p, x)


def test_score_rejects_nonfinite():
    p = network.init_params(np.random.default_rng(0))
    with pytest.raises(ValueError):
        network.score(p, np.array([np.nan] + [0.0] * 8))


@pytest.mark.parametrize("objective", ["pairwise", "squared"])
def test_gradients_match_finite_differences(objective):
    rng = np.random.default_rng(11)
    for _ in range(10):
        assert oracles.gradient_check(rng, objective) < 1e-4


def test_gradient_without_reconstruction():
    assert oracles.gradient_check(np.random.default_rng(5), "pairwise", recon_weight=0.0) < 1e-4


def test_grouped_gradients_split_by_model():
    rng = np.random.default_rng(3)
    ps = [oracles.random_params(rng), oracles.random_params(rng)]
    X = rng.normal(size=(6, 9))
    groups = np.array([0, 1, 0, 1, 1, 0])
    pairs = np.array([[0, 1], [2, 3], [4, 5]])
    total, _, grads = network.loss_and_grad(ps, X, pairs=pairs, recon_weight=0.2, groups=groups)
    for g in range(2):
        def loss(theta, g=g):
            trial = list(ps)
            trial[g] = ps[g].with_flat(theta)
            return network.loss_and_grad(trial, X, pairs=pairs, recon_weight=0.2, groups=groups)[0]
        num = oracles.finite_difference(loss, ps[g].flat())
        assert oracles.relative_error(oracles.grads_flat(grads[g]), num) < 1e-4


def test_pairwise_loss_anchors():
    assert abs(network.pairwise_loss(1.7, 1.7) - math.log(2)) <= 1e-12
    assert abs(network.pairwise_loss(0.0, 10.0) - 4.54e-5) <= 1e-8
    big = network.pairwise_loss(100.0, 0.0)
    assert math.isfinite(big) and abs(big - 100.0) <= 1e-6


@given(st.floats(-50, 50), st.floats(-50, 50))
def test_pairwise_loss_symmetric_bound(a, b):
    s = network.pairwise_loss(a, b) + network.pairwise_loss(b, a)
    assert s >= 2 * math.log(2) - 1e-12
    if a == b:
        assert s == pytest.approx(2 * math.log(2), abs=1e-12)
    elif abs(a - b) > 1e-6:
        assert s > 2 * math.log(2)


def test_serialization_roundtrip():
    rng = np.random.default_rng(4)
    ps = [oracles.random_params(rng, 16, 8) for _ in range(3)]
    text = network.dumps(ps)
    assert text.startswith("rankalloc-scorer v1")
    back = network.loads(text)
    assert len(back) == 3 and all(a.equals(b) for a, b in zip(ps, back))


def test_serialization_rejects_other_format():
    with pytest.raises(ValueError):
        network.loads("something-else v9 models=1\n")


# labels

def test_identical_outcomes_no_pairs():
    assert derive_preferences(_record([2.0, 2.0, 2.0])) == []


def test_total_order_example():
    rec = _record([0.0, -2.0, -5.0])
    assert outcome_scores(rec, miss_penalty=0.0).tolist() == [0.0, 2.0, 5.0]
    assert set(derive_preferences(rec, miss_penalty=0.0)) == {(1, 2), (1, 3), (2, 3)}


def test_winner_uses_realized_delay_and_miss_penalty():
    rec = _record([4.0, 1.0], winner_idx=0, delay=3.0)
    assert outcome_scores(rec, miss_penalty=1.0).tolist() == [4.0, 0.0]
    assert derive_preferences(rec) == [(2, 1)]


@settings(max_examples=60)
@given(st.lists(st.integers(-6, 6).map(float), min_size=1, max_size=6), st.floats(0, 2))
def test_preferences_strict_partial_order(slacks, penalty):
    rec = _record(slacks)
    prefs = set(derive_preferences(rec, penalty))
    assert all(a != b for a, b in prefs)
    assert all((b, a) not in prefs for a, b in prefs)
    for (a, b), (c, d) in itertools.product(prefs, prefs):
        if b == c:
            assert (a, d) in prefs
    o = outcome_scores(rec, penalty)
    k = len(slacks)
    ties = sum(1 for i, j in itertools.combinations(range(k), 2) if abs(o[i] - o[j]) <= 1e-6)
    assert len(prefs) == k * (k - 1) // 2 - ties


def test_pairwise_set_indexes_rows():
    recs = _random_records(np.random.default_rng(0))
    X, pairs, groups = build_pairwise_set(recs)
    assert X.shape[1] == 9 and len(groups) == len(X)
    assert pairs.min() >= 0 and pairs.max() < len(X)
    Xr, y, _ = build_regression_set(recs)
    assert len(Xr) == len(y) == sum(len(r.candidates) for r in recs)


def test_estimation_bias():
    rec = _record([0.0], delay=0.0)
    rec.time, rec.realized_completion = 1.0, 4.5
    rec.features[0, 0], rec.features[0, 1] = 1.0, 2.0
    assert rec.completion_error() == 0.5
    assert estimation_bias([rec]) == 0.5


# training

def _fresh(seed=0):
    return [network.init_params(np.random.default_rng(seed))]


def test_train_round_deterministic():
    recs = _random_records(np.random.default_rng(1))
    cfg = TrainConfig(epochs=3)
    a = train_round(_fresh(), recs, cfg, np.random.default_rng(9))
    b = train_round(_fresh(), recs, cfg, np.random.default_rng(9))
    assert a[0].equals(b[0])
    assert not a[0].equals(_fresh()[0])


def test_zero_learning_rate_keeps_params():
    recs = _random_records(np.random.default_rng(1))
    start = _fresh()
    out = train_round(start, recs, TrainConfig(learning_rate=0.0, epochs=3), np.random.default_rng(0))
    assert out[0].equals(start[0])


def test_single_pair_converges():
    p = _fresh()
    X = np.random.default_rng(0).normal(size=(2, 9))
    pairs = np.array([[0, 1]])
    opt = network.Adam(0.01)
    losses = []
    for _ in range(200):
        loss, _, g = network.loss_and_grad(p, X, pairs=pairs, recon_weight=0.0)
        losses.append(loss)
        opt.step(p, g)
    assert losses[0] == pytest.approx(math.log(2), abs=1e-12)
    assert losses[-1] < math.log(2)
    assert all(b <= a for a, b in zip(losses, losses[1:]))


def test_separable_set_learned():
    rng = np.random.default_rng(0)
    w = rng.normal(size=9)
    X, pairs = oracles.separable_preferences(rng, w)
    Xt, pt = oracles.separable_preferences(rng, w)
    ranker = PairwiseRanker(random_state=0)
    before = np.mean(network.pairwise_loss(*ranker.fit(X, pairs[:0]).decision_function(Xt)[pt.T]))
    ranker = PairwiseRanker(random_state=0).fit(X, pairs)
    after = np.mean(network.pairwise_loss(*ranker.decision_function(Xt)[pt.T]))
    assert after <= before
    assert ranker.score(X, pairs) > 0.95
    assert ranker.score(Xt, pt) > 0.9


def test_constant_labels_regress_to_constant():
    X = np.random.default_rng(0).normal(size=(100, 9))
    reg = OutcomeRegressor(random_state=0).fit(X, np.full(100, 3.25))
    assert np.max(np.abs(reg.predict(X) - 3.25)) < 1e-2


def test_regression_mse_non_increasing():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(64, 9))
    y = np.tanh(X @ rng.normal(size=9) / 3)
    # full batch and a small step; Adam momentum can overshoot near the optimum at larger steps
    reg = OutcomeRegressor(batch_size=64, recon_weight=0.0, epochs=30, learning_rate=0.003, random_state=0).fit(X, y)
    mse = [h[1] for h in reg.history_]
    assert all(b <= a + 1e-12 for a, b in zip(mse, mse[1:]))


def test_estimators_follow_sklearn_conventions():
    r = PairwiseRanker(hidden=4, latent=2, epochs=1)
    assert clone(r).get_params() == r.get_params()
    r.set_params(epochs=3)
    assert r.epochs == 3
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        r.decision_function(np.zeros((1, 9)))


def test_running_moments_match_numpy():
    rows = np.random.default_rng(0).normal(size=(50, 9))
    m = RunningMoments()
    m.update(rows[:20])
    m.update(rows[20:])
    assert np.allclose(m.mean, rows.mean(axis=0)) and np.allclose(m.std, rows.std(axis=0))


# learned bidders

def _trained(cls, psi=1.0, **train):
    tasks = generate_tasks(HIGH_LOAD.with_seed(1))
    fleet = generate_fleet(FleetConfig(), seed=1)
    bidder = cls(HeuristicWeights(psi=psi), TrainConfig(**train), seed=1, n_machines=len(fleet))
    run(tasks, fleet, bidder, HIGH_LOAD.horizon)
    assert bidder.trained
    return bidder


SITUATION = (3.0, task(arrival=3.0, rho=2, deadline=6, chi=True), state(machine(speed=1.3), (1.0, 2.0)), resource(7, [8]))


@pytest.mark.parametrize("cls", [RankingBidder, RegressionBidder])
def test_cold_start_is_b2(cls):
    b = cls(HeuristicWeights(), TrainConfig())
    assert b.bid(*SITUATION) == HeuristicBidder("b2").bid(*SITUATION)


@pytest.mark.parametrize("cls", [RankingBidder, RegressionBidder])
def test_psi_zero_is_b2_after_training(cls):
    b = _trained(cls, psi=0.0)
    assert b.bid(*SITUATION) == bid_b2(*SITUATION, HeuristicWeights(psi=0.0))


def test_trained_ranking_bid_matches_functional_form():
    b = _trained(RankingBidder)
    assert b.bid(*SITUATION) == ranking_bid(b.estimator.params_[0], b.weights, *SITUATION)
    assert b.bid(*SITUATION) != bid_b2(*SITUATION, b.weights)
    assert len(b.curve) >= 1


def test_regression_bid_matches_functional_form():
    b = _trained(RegressionBidder)
    assert b.bid(*SITUATION) == pytest.approx(regression_bid(b.estimator, b.weights, *SITUATION), rel=1e-12)
    assert regression_bid(None, b.weights, *SITUATION) == bid_b2(*SITUATION, b.weights)


def test_bid_never_runs_decoder():
    b = _trained(RankingBidder)
    network.CALLS.clear()
    b.bid(*SITUATION)
    assert network.CALLS["decode"] == 0
    assert network.CALLS["encode"] == 1 and network.CALLS["head"] == 1


@given(st.lists(st.integers(-400, 400).map(lambda k: k / 32), min_size=1, max_size=6), st.integers(-64, 64))
def test_constant_score_shift_keeps_winner(scores, c):
    bids = dict(enumerate(scores))
    assert winner({m: b + c / 8 for m, b in bids.items()}) == winner(bids)


def test_per_machine_mode_runs():
    b = _trained(RankingBidder, per_machine=True)
    assert len(b.estimator.params_) == 5
    b.bid(*SITUATION)


def test_calibrated_counterfactual_runs():
    assert _trained(RankingBidder, counterfactual="calibrated").curve


def test_training_curve_csv(tmp_path):
    b = _trained(RankingBidder)
    write_training_curve(b.curve, tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "round,mean_pairwise_loss,pairwise_accuracy,recon_loss"
    assert len(lines) == len(b.curve) + 1


def test_train_config_validation():
    from rankalloc.domain import ConfigError
    for bad in (dict(train_every=0), dict(learning_rate=-1), dict(counterfactual="oracle")):
        with pytest.raises(ConfigError):
            TrainConfig(**bad).validate()
