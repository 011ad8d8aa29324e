"""Scikit-learn style wrappers around the autoencoder scorer."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ..workload import MODEL, stream
from . import network
from .training import fit_epochs, pairwise_accuracy


def _scaling(X, mean=None, scale=None):
    if mean is None:
        mean = X.mean(axis=0)
    if scale is None:
        scale = X.std(axis=0)
    scale = np.where(np.asarray(scale) > 1e-12, scale, 1.0)
    return np.asarray(mean, dtype=float), np.asarray(scale, dtype=float)


class _AutoencoderScorer(BaseEstimator):
    """Shared parameter handling for ranking and regression scorers.

    With ``n_models > 1`` each row is scored by the model selected through
    the ``groups`` argument.
    """

    def __init__(self, hidden=16, latent=8, learning_rate=0.01, epochs=20, batch_size=32,
                 recon_weight=0.1, n_models=1, warm_start=False, random_state=0):
        self.hidden = hidden
        self.latent = latent
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.recon_weight = recon_weight
        self.n_models = n_models
        self.warm_start = warm_start
        self.random_state = random_state

    def _prepare(self, X, groups, feature_mean, feature_scale):
        X = check_array(X, dtype=np.float64, ensure_all_finite=True)
        groups = np.zeros(len(X), dtype=int) if groups is None else np.asarray(groups, dtype=int)
        if not self.warm_start or not hasattr(self, "params_"):
            init_rng = stream(self.random_state, MODEL)
            self.params_ = [network.init_params(init_rng, X.shape[1], self.hidden, self.latent)
                            for _ in range(self.n_models)]
            self.optimizer_ = network.Adam(self.learning_rate)
            self._shuffle_rng = stream(self.random_state, MODEL, 1)
            self.n_rounds_ = 0
            self.history_ = []
        mean, scale = _scaling(X, feature_mean, feature_scale)
        for p in self.params_:
            p.mean[...] = mean
            p.scale[...] = scale
        self.n_features_in_ = X.shape[1]
        return X, groups

    def _raw(self, X, groups=None):
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64, ensure_all_finite=True)
        if groups is None:
            return network.score_batch(self.params_[0], X)
        groups = np.asarray(groups, dtype=int)
        out = np.empty(len(X))
        for g in np.unique(groups):
            idx = groups == g
            out[idx] = network.score_batch(self.params_[g], X[idx])
        return out


class PairwiseRanker(_AutoencoderScorer):
    """Scorer trained with the pairwise logistic loss; lower score means preferred."""

    def fit(self, X, pairs, groups=None, feature_mean=None, feature_scale=None):
        pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
        X, groups = self._prepare(X, groups, feature_mean, feature_scale)
        if len(pairs):
            hist = fit_epochs(self.params_, self.optimizer_, X, groups, self._shuffle_rng, self.epochs,
                              self.batch_size, self.recon_weight, pairs=pairs)
            self.history_.extend(hist)
        self.n_rounds_ += 1
        return self

    def decision_function(self, X, groups=None):
        return self._raw(X, groups)

    def predict(self, X, groups=None):
        return self._raw(X, groups)

    def score(self, X, pairs, groups=None):
        """Pairwise accuracy on ``pairs``."""
        return pairwise_accuracy(self._raw(X, groups), np.asarray(pairs, dtype=int).reshape(-1, 2))


class OutcomeRegressor(RegressorMixin, _AutoencoderScorer):
    """Same network, fitted by squared error to the outcome labels.

    Targets are standardized per fit; predictions are mapped back.
    """

    def fit(self, X, y, groups=None, feature_mean=None, feature_scale=None):
        X, groups = self._prepare(X, groups, feature_mean, feature_scale)
        y = np.asarray(y, dtype=float)
        if len(y) != len(X):
            raise ValueError("X and y lengths differ")
        self.y_mean_ = float(y.mean())
        std = float(y.std())
        self.y_scale_ = std if std > 1e-12 else 1.0
        yz = (y - self.y_mean_) / self.y_scale_
        hist = fit_epochs(self.params_, self.optimizer_, X, groups, self._shuffle_rng, self.epochs,
                          self.batch_size, self.recon_weight, y=yz)
        self.history_.extend(hist)
        self.n_rounds_ += 1
        return self

    def predict(self, X, groups=None):
        return self.y_mean_ + self.y_scale_ * self._raw(X, groups)
