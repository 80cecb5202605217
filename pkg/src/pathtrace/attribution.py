"""Shapley attribution of a target's anomaly score to upstream noise terms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import pandas as pd

from .errors import EmptyRowSet, EmptyVector, UnknownNode
from .scm import FittedScm, extract_noise, propagate, sample_noise
from .scoring import score


@dataclass(frozen=True)
class AttributionConfig:
    baseline_draws: int = 50
    exact_max_players: int = 10
    permutation_samples: int = 200
    seed: int = 0

    def __post_init__(self):
        if min(self.baseline_draws, self.exact_max_players, self.permutation_samples) <= 0:
            raise ValueError("attribution settings must be positive")


@dataclass
class ContributionMatrix:
    target: str
    rows: np.ndarray
    contributions: dict[str, np.ndarray]
    # h(all observed) and h(all resampled) per row, kept for efficiency checks
    full: np.ndarray = field(default=None)
    empty: np.ndarray = field(default=None)

    def __getitem__(self, node: str) -> np.ndarray:
        if node not in self.contributions:
            raise UnknownNode(f"{node!r} was not attributed")
        return self.contributions[node]

    @property
    def nodes(self) -> list[str]:
        return sorted(self.contributions)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({n: self.contributions[n] for n in self.nodes},
                            index=pd.Index(self.rows, name="row"))

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, float_format="%.17g")


MaskFn = Callable[[np.ndarray], np.ndarray]


def _shapley_weights(p: int) -> np.ndarray:
    # weight of a coalition of size s that excludes the player
    return np.array([math.factorial(s) * math.factorial(p - s - 1) / math.factorial(p) for s in range(p)])


def shapley_masks(value: MaskFn, p: int, cfg: AttributionConfig | None = None, rng=None) -> np.ndarray:
    """Shapley values for ``p`` players of a vectorised game.

    ``value`` maps a boolean coalition matrix (m x p) to m payoffs. Exact
    enumeration is used up to ``cfg.exact_max_players`` players, otherwise
    the permutation estimator with ``cfg.permutation_samples`` orderings.
    Both modes telescope, so the values sum to ``v(full) - v(empty)``.
    """
    cfg = cfg or AttributionConfig()
    if p < 1:
        raise ValueError("need at least one player")
    bits = 1 << np.arange(p, dtype=np.int64)
    if p <= cfg.exact_max_players:
        codes = np.arange(1 << p, dtype=np.int64)
        masks = (codes[:, None] & bits) != 0
        v = np.asarray(value(masks), dtype=float)
        sizes = masks.sum(axis=1)
        w = _shapley_weights(p)
        phi = np.empty(p)
        for i in range(p):
            without = codes[~masks[:, i]]
            phi[i] = np.sum(w[sizes[without]] * (v[without | bits[i]] - v[without]))
        return phi

    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    T = cfg.permutation_samples
    perms = np.argsort(rng.random((T, p)), axis=1)
    # prefix codes: pre[t, j] = coalition before the j-th player of permutation t
    step = bits[perms]
    pre = np.concatenate([np.zeros((T, 1), dtype=np.int64), np.cumsum(step, axis=1)], axis=1)
    uniq, inv = np.unique(pre, return_inverse=True)
    v = np.asarray(value((uniq[:, None] & bits) != 0), dtype=float)
    vals = v[inv.reshape(pre.shape)]
    marg = vals[:, 1:] - vals[:, :-1]
    phi = np.zeros(p)
    np.add.at(phi, perms.ravel(), marg.ravel())
    return phi / T


def shapley(h: Callable[[frozenset], float], players: Sequence, cfg: AttributionConfig | None = None,
            rng=None) -> dict:
    """Shapley values of a set function ``h`` over ``players``."""
    players = list(players)

    def value(masks):
        return np.array([h(frozenset(q for q, m in zip(players, row) if m)) for row in masks])

    phi = shapley_masks(value, len(players), cfg, rng)
    return dict(zip(players, phi))


def attribute_anomalies(scm: FittedScm, target: str, data: pd.DataFrame, rows,
                        cfg: AttributionConfig | None = None) -> ContributionMatrix:
    """Per-row Shapley contributions of each ancestor's (and the target's own)
    noise to the target's marginal anomaly score.

    For row ``r`` the coalition S keeps its observed noise, everyone else is
    resampled from the fitted noise distributions; the payoff is the target's
    score averaged over ``baseline_draws`` resamples. The same draws are reused
    for every coalition of a row.
    """
    cfg = cfg or AttributionConfig()
    if target not in scm.mechanisms:
        raise UnknownNode(f"unknown node {target!r}")
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        raise EmptyRowSet("no anomaly rows to attribute")
    players = sorted(scm.dag.ancestors(target) | {target})
    p = len(players)
    B = cfg.baseline_draws
    observed = extract_noise(_restrict(scm, players), data.iloc[rows])
    target_scorer = scm.mechanisms[target].marginal_scorer

    contrib = np.zeros((rows.size, p))
    full = np.zeros(rows.size)
    empty = np.zeros(rows.size)
    for k, r in enumerate(rows):
        rng = np.random.default_rng([cfg.seed, int(r)])
        draws = np.column_stack([sample_noise(scm.mechanisms[n], B, rng) for n in players])
        obs = np.array([observed[n][k] for n in players])

        def value(masks, draws=draws, obs=obs):
            m = masks.shape[0]
            eps = np.where(np.repeat(masks, B, axis=0), obs, np.tile(draws, (m, 1)))
            out = propagate(scm, {n: eps[:, j] for j, n in enumerate(players)}, nodes=players)
            return score(target_scorer, out[target]).reshape(m, B).mean(axis=1)

        contrib[k] = shapley_masks(value, p, cfg, np.random.default_rng([cfg.seed, int(r), 1]))
        ends = value(np.array([[True] * p, [False] * p]))
        full[k], empty[k] = ends
    return ContributionMatrix(target, rows, {n: contrib[:, j] for j, n in enumerate(players)}, full, empty)


def _restrict(scm: FittedScm, nodes) -> FittedScm:
    keep = set(nodes)
    return FittedScm(scm.dag, {n: m for n, m in scm.mechanisms.items() if n in keep}, scm.seed, scm.folds)


def max_abs_contribution(cm: ContributionMatrix, node: str) -> float:
    vec = cm[node]
    if vec.size == 0:
        raise EmptyVector(f"no contributions for {node!r}")
    return float(np.max(np.abs(vec)))


def mean_contribution(cm: ContributionMatrix | Sequence[float], node: str | None = None) -> float:
    vec = np.asarray(cm[node] if node is not None else cm, dtype=float)
    if vec.size == 0:
        raise EmptyVector("cannot average an empty contribution vector")
    return float(vec.mean())
