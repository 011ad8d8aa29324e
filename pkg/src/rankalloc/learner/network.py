"""Compact autoencoder scorer: tanh encoder, linear scoring head, tanh decoder.

Only ``encode`` and the head run at inference; ``decode`` is reached solely
from the training loss. ``CALLS`` counts both so callers can verify that.
"""

from __future__ import annotations

import collections
from dataclasses import dataclass, fields, replace

import numpy as np

N_FEATURES = 9
FORMAT_TAG = "rankalloc-scorer"
FORMAT_VERSION = 1

CALLS = collections.Counter()

TRAINABLE = ("W1", "b1", "W2", "b2", "wh", "bh", "D1", "d1", "D2", "d2")


@dataclass
class ScorerParams:
    W1: np.ndarray  # (n_in, hidden)
    b1: np.ndarray
    W2: np.ndarray  # (hidden, latent)
    b2: np.ndarray
    wh: np.ndarray  # (latent,)
    bh: np.ndarray  # (1,)
    D1: np.ndarray  # (latent, hidden)
    d1: np.ndarray
    D2: np.ndarray  # (hidden, n_in)
    d2: np.ndarray
    mean: np.ndarray  # input standardization, not trained
    scale: np.ndarray

    def copy(self) -> "ScorerParams":
        return replace(self, **{f.name: getattr(self, f.name).copy() for f in fields(self)})

    def flat(self) -> np.ndarray:
        return np.concatenate([getattr(self, k).ravel() for k in TRAINABLE])

    def with_flat(self, vec: np.ndarray) -> "ScorerParams":
        out = self.copy()
        i = 0
        for k in TRAINABLE:
            a = getattr(out, k)
            a[...] = vec[i:i + a.size].reshape(a.shape)
            i += a.size
        return out

    def equals(self, other: "ScorerParams") -> bool:
        return all(np.array_equal(getattr(self, f.name), getattr(other, f.name)) for f in fields(self))


def init_params(rng: np.random.Generator, n_in: int = N_FEATURES, hidden: int = 16, latent: int = 8) -> ScorerParams:
    """Glorot-uniform layers; the scoring head starts at exactly zero."""

    def glorot(a, b):
        lim = np.sqrt(6.0 / (a + b))
        return rng.uniform(-lim, lim, size=(a, b))

    return ScorerParams(
        W1=glorot(n_in, hidden), b1=np.zeros(hidden),
        W2=glorot(hidden, latent), b2=np.zeros(latent),
        wh=np.zeros(latent), bh=np.zeros(1),
        D1=glorot(latent, hidden), d1=np.zeros(hidden),
        D2=glorot(hidden, n_in), d2=np.zeros(n_in),
        mean=np.zeros(n_in), scale=np.ones(n_in),
    )


def normalize(params: ScorerParams, X: np.ndarray) -> np.ndarray:
    return (X - params.mean) / params.scale


def encode(params: ScorerParams, Xn: np.ndarray):
    CALLS["encode"] += 1
    h1 = np.tanh(Xn @ params.W1 + params.b1)
    z = np.tanh(h1 @ params.W2 + params.b2)
    return h1, z


def head(params: ScorerParams, z: np.ndarray) -> np.ndarray:
    CALLS["head"] += 1
    return z @ params.wh + params.bh[0]


def decode(params: ScorerParams, z: np.ndarray):
    CALLS["decode"] += 1
    g1 = np.tanh(z @ params.D1 + params.d1)
    return g1, g1 @ params.D2 + params.d2


def score_batch(params: ScorerParams, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite feature vector")
    _, z = encode(params, normalize(params, X))
    return head(params, z)


def score(params: ScorerParams, x) -> float:
    return float(score_batch(params, x)[0])


def pairwise_loss(f_a, f_b):
    """``log(1 + exp(f_a - f_b))`` for a preferred over b, overflow-safe."""
    return np.logaddexp(0.0, np.subtract(f_a, f_b))


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _forward(params: ScorerParams, X: np.ndarray) -> dict:
    Xn = normalize(params, X)
    h1, z = encode(params, Xn)
    f = head(params, z)
    g1, r = decode(params, z)
    return {"Xn": Xn, "h1": h1, "z": z, "f": f, "g1": g1, "diff": r - Xn}


def _backward(params: ScorerParams, c: dict, df: np.ndarray, dr: np.ndarray) -> dict:
    grads = {}
    grads["D2"] = c["g1"].T @ dr
    grads["d2"] = dr.sum(axis=0)
    dc1 = (dr @ params.D2.T) * (1.0 - c["g1"] ** 2)
    grads["D1"] = c["z"].T @ dc1
    grads["d1"] = dc1.sum(axis=0)

    grads["wh"] = c["z"].T @ df
    grads["bh"] = np.array([df.sum()])
    dz = np.outer(df, params.wh) + dc1 @ params.D1.T
    da2 = dz * (1.0 - c["z"] ** 2)
    grads["W2"] = c["h1"].T @ da2
    grads["b2"] = da2.sum(axis=0)
    da1 = (da2 @ params.W2.T) * (1.0 - c["h1"] ** 2)
    grads["W1"] = c["Xn"].T @ da1
    grads["b1"] = da1.sum(axis=0)
    return grads


def forward_backward(params_list, X: np.ndarray, groups: np.ndarray, out_grad, recon_weight: float):
    """One pass over rows ``X``; row ``i`` is scored by ``params_list[groups[i]]``.

    ``out_grad(f)`` returns ``(loss, dloss/df)`` for the head outputs. The
    reconstruction term is ``recon_weight`` times the mean squared error over
    all rows and features. Returns ``(total, parts, grads_per_model)``.
    """
    f = np.empty(len(X))
    caches = {}
    for g in np.unique(groups):
        idx = np.flatnonzero(groups == g)
        caches[g] = (idx, _forward(params_list[g], X[idx]))
        f[idx] = caches[g][1]["f"]
    task_loss, df = out_grad(f)

    size = X.size
    recon_sum = 0.0
    grads = [None] * len(params_list)
    for g, (idx, c) in caches.items():
        recon_sum += float(np.sum(c["diff"] ** 2))
        dr = recon_weight * 2.0 * c["diff"] / size
        grads[g] = _backward(params_list[g], c, df[idx], dr)
    recon = recon_sum / size
    total = task_loss + recon_weight * recon
    return total, {"task": task_loss, "recon": recon, "scores": f}, grads


def pairwise_objective(pairs: np.ndarray):
    """Mean pairwise loss over ``pairs`` (rows: preferred index, other index)."""
    a, b = pairs[:, 0], pairs[:, 1]

    def out_grad(f):
        d = f[a] - f[b]
        loss = float(np.mean(pairwise_loss(d, 0.0)))
        g = _sigmoid(d) / len(d)
        df = np.zeros_like(f)
        np.add.at(df, a, g)
        np.add.at(df, b, -g)
        return loss, df

    return out_grad


def squared_objective(y: np.ndarray):
    def out_grad(f):
        e = f - y
        return float(np.mean(e ** 2)), 2.0 * e / len(e)

    return out_grad


def loss_and_grad(params, X, pairs=None, y=None, recon_weight: float = 0.1, groups=None):
    """Pairwise objective if ``pairs`` is given, else squared error against ``y``.

    ``params`` is a single ``ScorerParams`` (grads returned as a dict) or a
    list of them with ``groups`` mapping rows to models.
    """
    X = np.asarray(X, dtype=float)
    single = isinstance(params, ScorerParams)
    params_list = [params] if single else list(params)
    groups = np.zeros(len(X), dtype=int) if groups is None else np.asarray(groups, dtype=int)
    obj = pairwise_objective(np.asarray(pairs)) if pairs is not None else squared_objective(np.asarray(y, float))
    total, parts, grads = forward_backward(params_list, X, groups, obj, recon_weight)
    if single:
        grads = grads[0]
    return total, parts, grads


class Adam:
    def __init__(self, lr: float = 0.01, b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params_list, grads_list) -> None:
        """Update every model in place; models with ``None`` grads saw no rows."""
        self.t += 1
        for i, (params, grads) in enumerate(zip(params_list, grads_list)):
            if grads is None:
                continue
            self._update(i, params, grads)

    def _update(self, i: int, params: ScorerParams, grads: dict) -> None:
        for k in TRAINABLE:
            g = grads[k]
            m = self.m.setdefault((i, k), np.zeros_like(g))
            v = self.v.setdefault((i, k), np.zeros_like(g))
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            mhat = m / (1 - self.b1 ** self.t)
            vhat = v / (1 - self.b2 ** self.t)
            getattr(params, k)[...] -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def dumps(params_list) -> str:
    """Text format: a version header, then per array ``name d0 [d1]`` and its row-major values."""
    lines = [f"{FORMAT_TAG} v{FORMAT_VERSION} models={len(params_list)}"]
    for i, p in enumerate(params_list):
        lines.append(f"model {i}")
        for f in fields(p):
            a = getattr(p, f.name)
            lines.append(" ".join([f.name] + [str(d) for d in a.shape]))
            lines.append(" ".join(repr(float(v)) for v in a.ravel()))
    return "\n".join(lines) + "\n"


def loads(text: str) -> list:
    lines = text.splitlines()
    tag, ver, count = lines[0].split()
    if tag != FORMAT_TAG or ver != f"v{FORMAT_VERSION}":
        raise ValueError(f"unsupported scorer format {lines[0]!r}")
    names = [f.name for f in fields(ScorerParams)]
    out, i = [], 1
    for _ in range(int(count.split("=")[1])):
        if not lines[i].startswith("model"):
            raise ValueError(f"line {i + 1}: expected model header")
        i += 1
        arrays = {}
        for name in names:
            key, *dims = lines[i].split()
            if key != name:
                raise ValueError(f"line {i + 1}: expected array {name}, found {key}")
            arrays[name] = np.array([float(v) for v in lines[i + 1].split()]).reshape([int(d) for d in dims])
            i += 2
        out.append(ScorerParams(**arrays))
    return out
