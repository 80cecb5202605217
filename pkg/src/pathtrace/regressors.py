"""Candidate regressors for non-root causal mechanisms.

Every candidate exposes ``fit(X, y)``, ``predict(X)``, ``to_dict()`` and a
``from_dict`` classmethod so fitted models survive a JSON round trip. Inputs
are 2-D float arrays (rows x parents).
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree


def _as2d(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X.reshape(-1, 1) if X.ndim == 1 else X


def _scale(X):
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[~(sd > 0)] = 1.0
    return mu, sd


class ConstantMean:
    name = "constant"

    def __init__(self, value: float = 0.0):
        self.value = float(value)

    def fit(self, X, y):
        self.value = float(np.mean(y))
        return self

    def predict(self, X):
        return np.full(_as2d(X).shape[0], self.value)

    def to_dict(self):
        return {"value": self.value}

    @classmethod
    def from_dict(cls, d):
        return cls(d["value"])


class _LeastSquares:
    """Ordinary least squares on a feature expansion of standardized inputs."""

    name = ""

    def __init__(self):
        self.mu = self.sd = self.coef = None
        self.intercept = 0.0

    def _features(self, Z):
        return Z

    def fit(self, X, y):
        X = _as2d(X)
        y = np.asarray(y, dtype=float)
        self.mu, self.sd = _scale(X)
        F = self._features((X - self.mu) / self.sd)
        fm = F.mean(axis=0)
        ym = y.mean()
        coef, *_ = np.linalg.lstsq(F - fm, y - ym, rcond=None)
        self.coef = coef
        self.intercept = float(ym - fm @ coef)
        return self

    def predict(self, X):
        F = self._features((_as2d(X) - self.mu) / self.sd)
        return F @ self.coef + self.intercept

    def raw_slopes(self) -> np.ndarray:
        """Slopes in the original input units (linear model only)."""
        return self.coef[: len(self.sd)] / self.sd

    def to_dict(self):
        return {"mu": self.mu.tolist(), "sd": self.sd.tolist(),
                "coef": self.coef.tolist(), "intercept": self.intercept}

    @classmethod
    def from_dict(cls, d):
        m = cls()
        m.mu, m.sd = np.array(d["mu"]), np.array(d["sd"])
        m.coef, m.intercept = np.array(d["coef"]), d["intercept"]
        return m


class Linear(_LeastSquares):
    name = "linear"


class Poly2(_LeastSquares):
    """Degree-2 polynomial: each input, its square, and every pairwise product."""

    name = "poly2"

    def _features(self, Z):
        p = Z.shape[1]
        cols = [Z, Z * Z]
        cols += [(Z[:, i] * Z[:, j])[:, None] for i in range(p) for j in range(i + 1, p)]
        return np.hstack(cols)


class KNearest:
    name = "knn"

    def __init__(self, k: int = 5):
        self.k = k
        self.X = self.y = self.mu = self.sd = None
        self._tree = None

    def fit(self, X, y):
        X = _as2d(X)
        self.mu, self.sd = _scale(X)
        self.X = X
        self.y = np.asarray(y, dtype=float)
        self._tree = cKDTree((X - self.mu) / self.sd)
        return self

    def predict(self, X):
        Z = np.ascontiguousarray((_as2d(X) - self.mu) / self.sd)
        # counterfactual batches repeat query points heavily; query each once
        keys = Z.view(np.dtype((np.void, Z.dtype.itemsize * Z.shape[1]))).ravel()
        _, first, inv = np.unique(keys, return_index=True, return_inverse=True)
        k = min(self.k, self.y.size)
        _, idx = self._tree.query(Z[first], k=k)
        idx = idx.reshape(len(first), -1)
        return self.y[idx].mean(axis=1)[inv.ravel()]

    def to_dict(self):
        return {"k": self.k, "X": self.X.tolist(), "y": self.y.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["k"]).fit(np.array(d["X"], dtype=float), np.array(d["y"], dtype=float))


class BoostedTrees:
    """Least-squares gradient boosting of depth-2 trees on quantile-binned inputs."""

    name = "boost"

    def __init__(self, rounds: int = 50, learning_rate: float = 0.1, max_bins: int = 32):
        self.rounds = rounds
        self.learning_rate = learning_rate
        self.max_bins = max_bins
        self.base = 0.0
        # each tree: (f0, t0, f_left, t_left, f_right, t_right, v_ll, v_lr, v_rl, v_rr)
        self.trees: list[tuple] = []

    def _edges(self, X):
        qs = np.linspace(0, 1, self.max_bins + 1)[1:-1]
        return [np.unique(np.quantile(X[:, f], qs)) for f in range(X.shape[1])]

    def fit(self, X, y):
        X = _as2d(X)
        y = np.asarray(y, dtype=float)
        n, p = X.shape
        edges = self._edges(X)
        nb = self.max_bins
        bins = np.column_stack([np.searchsorted(edges[f], X[:, f], side="left") for f in range(p)])
        flat = (bins + np.arange(p) * nb).ravel()
        self.base = float(y.mean())
        pred = np.full(n, self.base)
        self.trees = []
        for _ in range(self.rounds):
            r = y - pred
            f0, j0 = _best_split(flat, np.zeros(n, dtype=np.int64), r, p, nb, 1)[0]
            side = (bins[:, f0] > j0).astype(np.int64) if f0 >= 0 else np.zeros(n, dtype=np.int64)
            (fl, jl), (fr, jr) = _best_split(flat, side, r, p, nb, 2)
            leaf = side * 2
            if fl >= 0:
                leaf += np.where(side == 0, bins[:, fl] > jl, 0)
            if fr >= 0:
                leaf += np.where(side == 1, bins[:, fr] > jr, 0)
            cnt = np.bincount(leaf, minlength=4)
            vals = np.bincount(leaf, weights=r, minlength=4) / np.maximum(cnt, 1)
            pred = pred + self.learning_rate * vals[leaf]

            def thr(f, j):
                return (int(f), float(edges[f][j])) if f >= 0 and j < len(edges[f]) else (-1, 0.0)

            self.trees.append((*thr(f0, j0), *thr(fl, jl), *thr(fr, jr), *map(float, vals)))
        return self

    def predict(self, X):
        X = _as2d(X)
        out = np.full(X.shape[0], self.base)
        lr = self.learning_rate
        for f0, t0, fl, tl, fr, tr, a, b, c, d in self.trees:
            right = X[:, f0] > t0 if f0 >= 0 else np.zeros(X.shape[0], dtype=bool)
            lo = np.where(X[:, fl] > tl, b, a) if fl >= 0 else a
            hi = np.where(X[:, fr] > tr, d, c) if fr >= 0 else c
            out += lr * np.where(right, hi, lo)
        return out

    def to_dict(self):
        return {"rounds": self.rounds, "learning_rate": self.learning_rate,
                "max_bins": self.max_bins, "base": self.base,
                "trees": [list(t) for t in self.trees]}

    @classmethod
    def from_dict(cls, d):
        m = cls(d["rounds"], d["learning_rate"], d["max_bins"])
        m.base = d["base"]
        m.trees = [tuple(t) for t in d["trees"]]
        return m


def _best_split(flat, group, r, p, nb, ngroups):
    """Best (feature, bin) split per group of rows by squared-error reduction.

    ``flat`` holds per-row, per-feature bin ids offset by feature; ``group``
    assigns each row to one of ``ngroups`` independent partitions.
    """
    key = (np.repeat(group, p) * (p * nb) + flat)
    size = ngroups * p * nb
    cnt = np.bincount(key, minlength=size).reshape(ngroups, p, nb).astype(float)
    tot = np.bincount(key, weights=np.repeat(r, p), minlength=size).reshape(ngroups, p, nb)
    lc, ls = np.cumsum(cnt, axis=2), np.cumsum(tot, axis=2)
    n_all, s_all = lc[:, :, -1:], ls[:, :, -1:]
    rc, rs = n_all - lc, s_all - ls
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = ls ** 2 / lc + rs ** 2 / rc - s_all ** 2 / n_all
    gain[(lc == 0) | (rc == 0)] = -np.inf
    out = []
    for g in range(ngroups):
        flat_idx = int(np.argmax(gain[g]))
        f, j = divmod(flat_idx, nb)
        out.append((f, j) if np.isfinite(gain[g, f, j]) and gain[g, f, j] > 1e-12 else (-1, 0))
    return out


CANDIDATES = (ConstantMean, Linear, Poly2, KNearest, BoostedTrees)
REGISTRY = {c.name: c for c in CANDIDATES}


def from_dict(d: dict):
    return REGISTRY[d["kind"]].from_dict(d["params"])


def to_dict(model) -> dict:
    return {"kind": model.name, "params": model.to_dict()}
