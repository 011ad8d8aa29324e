"""Per-candidate outcome labels and the preference pairs derived from them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass
class CandidateRecord:
    """One auction: feature rows for every candidate plus the realized winner delay.

    ``features`` has shape ``(k, 9)`` with rows in ``candidates`` order.
    """

    task_id: int
    candidates: tuple
    features: np.ndarray
    winner: int
    realized_delay: Optional[float] = None
    time: float = 0.0
    realized_completion: Optional[float] = None

    def __post_init__(self):
        if len(self.candidates) < 1:
            raise ValueError("a record needs at least one candidate")
        self.features = np.asarray(self.features, dtype=float).reshape(len(self.candidates), -1)

    @property
    def finalized(self) -> bool:
        return self.realized_delay is not None

    @classmethod
    def from_entry(cls, entry) -> "CandidateRecord":
        return cls(entry.task_id, tuple(entry.candidates),
                   np.array([f.as_tuple() for f in entry.features]), entry.winner, time=entry.time)

    def completion_error(self) -> float:
        """Realized minus bid-time estimated completion of the winner."""
        i = self.candidates.index(self.winner)
        q, p = self.features[i, 0], self.features[i, 1]
        return self.realized_completion - (self.time + q + p)


def outcome_scores(rec: CandidateRecord, miss_penalty: float = 1.0, est_bias: float = 0.0) -> np.ndarray:
    """Lower is better.

    The winner is scored by its realized delay; other candidates by the
    delay their bid-time estimate implies, ``max(0, -slack + est_bias)``.
    A miss (positive delay) adds ``miss_penalty``.
    """
    est = np.maximum(0.0, est_bias - rec.features[:, 2])
    if rec.realized_delay is not None:
        est[rec.candidates.index(rec.winner)] = rec.realized_delay
    return est + miss_penalty * (est > 0)


def derive_preferences(rec: CandidateRecord, miss_penalty: float = 1.0, tie_eps: float = 1e-6,
                       est_bias: float = 0.0) -> list:
    """Pairs ``(a, b)`` of machine ids with ``a`` strictly preferred over ``b``.

    Candidates whose outcomes differ by no more than ``tie_eps`` are not compared.
    """
    o = outcome_scores(rec, miss_penalty, est_bias)
    pairs = []
    for i, a in enumerate(rec.candidates):
        for j, b in enumerate(rec.candidates):
            if o[i] < o[j] - tie_eps:
                pairs.append((a, b))
    return pairs


def build_pairwise_set(records, miss_penalty: float = 1.0, tie_eps: float = 1e-6, per_machine: bool = False,
                       est_bias: float = 0.0):
    """Stack records that yield at least one pair.

    Returns ``(X, pairs, groups)`` with ``pairs`` as row indices into ``X``.
    """
    rows, pairs, groups = [], [], []
    for rec in records:
        prefs = derive_preferences(rec, miss_penalty, tie_eps, est_bias)
        if not prefs:
            continue
        base = len(rows)
        rows.extend(rec.features)
        groups.extend(rec.candidates if per_machine else [0] * len(rec.candidates))
        pos = {m: base + i for i, m in enumerate(rec.candidates)}
        pairs.extend((pos[a], pos[b]) for a, b in prefs)
    return (np.array(rows, dtype=float).reshape(-1, 9), np.array(pairs, dtype=int).reshape(-1, 2),
            np.array(groups, dtype=int))


def build_regression_set(records, miss_penalty: float = 1.0, per_machine: bool = False, est_bias: float = 0.0):
    """Stack every candidate row with its outcome label. Returns ``(X, y, groups)``."""
    rows, y, groups = [], [], []
    for rec in records:
        rows.extend(rec.features)
        y.extend(outcome_scores(rec, miss_penalty, est_bias))
        groups.extend(rec.candidates if per_machine else [0] * len(rec.candidates))
    return (np.array(rows, dtype=float).reshape(-1, 9), np.array(y, dtype=float),
            np.array(groups, dtype=int))


def estimation_bias(records) -> float:
    """Mean of realized minus estimated completion over finalized winners."""
    errs = [rec.completion_error() for rec in records if rec.realized_completion is not None]
    return float(np.mean(errs)) if errs else 0.0
