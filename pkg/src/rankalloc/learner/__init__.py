"""Learned bidders: an autoencoder scorer trained by pairwise ranking or by regression."""

import numpy as np

from ..bidding import _b2, features
from .bidders import RankingBidder, RegressionBidder, RunningMoments, write_training_curve
from .estimators import OutcomeRegressor, PairwiseRanker
from .labels import CandidateRecord, derive_preferences, outcome_scores
from .network import ScorerParams, init_params, pairwise_loss, score
from .training import TrainConfig, pairwise_accuracy, train_round


def ranking_bid(params, weights, t, task, machine, resource) -> float:
    x = features(t, task, machine, resource)
    return _b2(x, weights) + weights.psi * score(params, np.array(x.as_tuple()))


def regression_bid(regressor, weights, t, task, machine, resource) -> float:
    """Heuristic bid plus the regressed outcome; an unfitted regressor adds nothing."""
    x = features(t, task, machine, resource)
    base = _b2(x, weights)
    if regressor is None or not hasattr(regressor, "params_"):
        return base
    return base + weights.psi * float(regressor.predict(np.array([x.as_tuple()]))[0])


__all__ = [
    "CandidateRecord", "OutcomeRegressor", "PairwiseRanker", "RankingBidder", "RegressionBidder",
    "RunningMoments", "ScorerParams", "TrainConfig", "derive_preferences", "init_params",
    "outcome_scores", "pairwise_accuracy", "pairwise_loss", "ranking_bid", "regression_bid",
    "score", "train_round", "write_training_curve",
]
