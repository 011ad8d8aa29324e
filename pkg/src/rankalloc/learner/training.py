"""Minibatch training shared by the ranking and regression scorers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..domain import ConfigError
from . import network
from .labels import build_pairwise_set


@dataclass(frozen=True)
class TrainConfig:
    train_every: int = 10
    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 0.01
    recon_weight: float = 0.1
    buffer_cap: int = 2000
    hidden: int = 16
    latent: int = 8
    miss_penalty: float = 1.0
    tie_eps: float = 1e-6
    per_machine: bool = False
    # "estimate": losers are labelled by their raw bid-time delay estimate;
    # "calibrated": that estimate is shifted by the mean winner estimation error.
    counterfactual: str = "estimate"

    def validate(self) -> "TrainConfig":
        for name in ("train_every", "epochs", "batch_size", "buffer_cap", "hidden", "latent"):
            if getattr(self, name) < 1:
                raise ConfigError(f"train.{name} must be a positive integer")
        if not self.learning_rate >= 0:
            raise ConfigError("train.learning_rate must be >= 0")
        if not self.recon_weight >= 0:
            raise ConfigError("train.recon_weight must be >= 0")
        if not (self.miss_penalty >= 0 and self.tie_eps >= 0):
            raise ConfigError("train.miss_penalty and train.tie_eps must be >= 0")
        if self.counterfactual not in ("estimate", "calibrated"):
            raise ConfigError("train.counterfactual must be 'estimate' or 'calibrated'")
        return self


def _pair_batches(pairs, batch_size, rng):
    order = rng.permutation(len(pairs))
    for start in range(0, len(order), batch_size):
        sub = pairs[order[start:start + batch_size]]
        rows, inv = np.unique(sub.ravel(), return_inverse=True)
        yield rows, inv.reshape(sub.shape)


def fit_epochs(params_list, optimizer, X, groups, rng, epochs, batch_size, recon_weight, pairs=None, y=None):
    """Run ``epochs`` passes of minibatch updates in place.

    Batches are drawn over pairs for the pairwise objective and over rows for
    the squared objective. Returns the full-set objective after each epoch.
    """
    history = []
    for _ in range(epochs):
        if pairs is not None:
            for rows, sub_pairs in _pair_batches(pairs, batch_size, rng):
                _, _, grads = network.loss_and_grad(params_list, X[rows], pairs=sub_pairs,
                                                    recon_weight=recon_weight, groups=groups[rows])
                optimizer.step(params_list, grads)
        else:
            order = rng.permutation(len(X))
            for start in range(0, len(order), batch_size):
                rows = order[start:start + batch_size]
                _, _, grads = network.loss_and_grad(params_list, X[rows], y=y[rows],
                                                    recon_weight=recon_weight, groups=groups[rows])
                optimizer.step(params_list, grads)
        total, parts, _ = network.loss_and_grad(params_list, X, pairs=pairs, y=y,
                                                recon_weight=recon_weight, groups=groups)
        history.append((total, parts["task"], parts["recon"]))
    return history


def pairwise_accuracy(scores: np.ndarray, pairs: np.ndarray) -> float:
    """Fraction of pairs whose preferred row scores strictly lower."""
    if len(pairs) == 0:
        return float("nan")
    return float(np.mean(scores[pairs[:, 0]] < scores[pairs[:, 1]]))


def train_round(params, buffer, cfg: TrainConfig, rng: np.random.Generator, optimizer=None):
    """One pairwise training round over the records in ``buffer``.

    ``params`` is a list of ``ScorerParams`` (one per group). Returns new
    parameters; the inputs are not modified. With no preference pairs the
    parameters come back unchanged.
    """
    params = [p.copy() for p in params]
    X, pairs, groups = build_pairwise_set(buffer, cfg.miss_penalty, cfg.tie_eps, cfg.per_machine)
    if len(pairs) == 0:
        return params
    if not cfg.per_machine:
        groups = np.zeros(len(X), dtype=int)
    optimizer = optimizer or network.Adam(cfg.learning_rate)
    fit_epochs(params, optimizer, X, groups, rng, cfg.epochs, cfg.batch_size, cfg.recon_weight, pairs=pairs)
    return params
