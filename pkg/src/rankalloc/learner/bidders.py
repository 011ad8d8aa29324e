"""Bidders that add a learned correction to the resource-aware heuristic bid."""

from __future__ import annotations

import collections
import csv

import numpy as np

from ..bidding import Bidder, HeuristicWeights, _b2, features
from . import network
from .estimators import OutcomeRegressor, PairwiseRanker
from .labels import CandidateRecord, build_pairwise_set, build_regression_set, estimation_bias
from .training import TrainConfig, pairwise_accuracy

CURVE_COLUMNS = ("round", "mean_pairwise_loss", "pairwise_accuracy", "recon_loss")


class RunningMoments:
    """Welford per-feature mean and variance."""

    def __init__(self, n_features: int = network.N_FEATURES):
        self.n = 0
        self.mean = np.zeros(n_features)
        self._m2 = np.zeros(n_features)

    def update(self, rows: np.ndarray) -> None:
        for x in rows:
            self.n += 1
            d = x - self.mean
            self.mean += d / self.n
            self._m2 += d * (x - self.mean)

    @property
    def std(self) -> np.ndarray:
        if self.n < 2:
            return np.ones_like(self.mean)
        return np.sqrt(self._m2 / self.n)


class _LearnedBidder(Bidder):
    def __init__(self, weights: HeuristicWeights = None, train: TrainConfig = None, seed: int = 0,
                 n_machines: int = 1):
        self.weights = weights or HeuristicWeights()
        self.train_cfg = (train or TrainConfig()).validate()
        self.seed = seed
        self.estimator = self._make_estimator(n_machines if self.train_cfg.per_machine else 1)
        self.moments = RunningMoments()
        self.buffer = collections.deque(maxlen=self.train_cfg.buffer_cap)
        self.pending = {}
        self.n_auctions = 0
        self._last_trained = 0
        self.curve = []

    def _make_estimator(self, n_models):
        c = self.train_cfg
        return self.estimator_cls(hidden=c.hidden, latent=c.latent, learning_rate=c.learning_rate,
                                  epochs=c.epochs, batch_size=c.batch_size, recon_weight=c.recon_weight,
                                  n_models=n_models, warm_start=True, random_state=self.seed)

    @property
    def trained(self) -> bool:
        return hasattr(self.estimator, "params_")

    def _group(self, machine_id: int) -> int:
        return machine_id if self.train_cfg.per_machine else 0

    def correction(self, x, machine_id: int) -> float:
        raise NotImplementedError

    def bid(self, t, task, machine, resource):
        x = features(t, task, machine, resource)
        base = _b2(x, self.weights)
        if not self.trained or self.weights.psi == 0:
            return base
        return base + self.weights.psi * self.correction(np.array(x.as_tuple()), machine.spec.id)

    def on_auction(self, entry) -> None:
        rec = CandidateRecord.from_entry(entry)
        self.pending[entry.task_id] = rec
        self.moments.update(rec.features)
        self.n_auctions += 1

    def observe(self, record, entry) -> None:
        rec = self.pending.pop(record.task_id)
        rec.realized_delay = record.delay
        rec.realized_completion = record.completion
        self.buffer.append(rec)

    def maybe_train(self, clock: float) -> None:
        n = self.n_auctions
        if n == 0 or n % self.train_cfg.train_every or n == self._last_trained:
            return
        self._last_trained = n
        self._train()

    def _est_bias(self) -> float:
        if self.train_cfg.counterfactual == "calibrated":
            return estimation_bias(self.buffer)
        return 0.0

    def _pairwise_set(self):
        c = self.train_cfg
        return build_pairwise_set(self.buffer, c.miss_penalty, c.tie_eps, c.per_machine, self._est_bias())

    def _log_round(self, predict) -> None:
        c = self.train_cfg
        X, pairs, groups = self._pairwise_set()
        if len(pairs) == 0:
            self.curve.append((len(self.curve) + 1, float("nan"), float("nan"), float("nan")))
            return
        s = predict(X, groups)
        loss = float(np.mean(network.pairwise_loss(s[pairs[:, 0]], s[pairs[:, 1]])))
        _, parts, _ = network.loss_and_grad(self.estimator.params_, X, pairs=pairs,
                                            recon_weight=c.recon_weight, groups=groups)
        self.curve.append((len(self.curve) + 1, loss, pairwise_accuracy(s, pairs), parts["recon"]))


class RankingBidder(_LearnedBidder):
    """Heuristic bid plus ``psi`` times a pairwise-trained score."""

    name = "ranking"
    estimator_cls = PairwiseRanker

    def correction(self, x, machine_id):
        return float(network.score(self.estimator.params_[self._group(machine_id)], x))

    def _train(self) -> None:
        X, pairs, groups = self._pairwise_set()
        if len(pairs) == 0:
            return
        self.estimator.fit(X, pairs, groups, feature_mean=self.moments.mean, feature_scale=self.moments.std)
        self._log_round(lambda X, g: self.estimator.decision_function(X, g))


class RegressionBidder(_LearnedBidder):
    """Heuristic bid plus ``psi`` times a regressed outcome prediction.

    Uses the same labels and network as ``RankingBidder``; only the loss differs.
    """

    name = "regression"
    estimator_cls = OutcomeRegressor

    def correction(self, x, machine_id):
        p = network.score(self.estimator.params_[self._group(machine_id)], x)
        return self.estimator.y_mean_ + self.estimator.y_scale_ * p

    def _train(self) -> None:
        c = self.train_cfg
        X, y, groups = build_regression_set(self.buffer, c.miss_penalty, c.per_machine, self._est_bias())
        if len(y) == 0:
            return
        self.estimator.fit(X, y, groups, feature_mean=self.moments.mean, feature_scale=self.moments.std)
        self._log_round(lambda X, g: self.estimator.predict(X, g))


def write_training_curve(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CURVE_COLUMNS)
        for r in rows:
            w.writerow([r[0]] + [repr(float(v)) for v in r[1:]])
