"""Rank-based anomaly scoring: marginal quantile scores and structural scores
of a node's residual given its parents."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import EmptyInput, EmptyRowSet, InsufficientData, NonFiniteInput, UnknownNode

if TYPE_CHECKING:
    import pandas as pd

    from .scm import FittedScm


@dataclass(frozen=True)
class QuantileScorer:
    """Median-centred two-sided empirical CDF scorer.

    ``score(x) = max(0, 1 - 2 * min(P(X <= x), P(X >= x)))`` with empirical
    probabilities that count ties on both sides. The result is 0 across the
    median region, 1 beyond the support, and nondecreasing as ``x`` moves
    away from the median in either direction.
    """

    sample: np.ndarray

    def __call__(self, x):
        return score(self, x)


def fit_scorer(values: Sequence[float]) -> QuantileScorer:
    arr = np.sort(np.asarray(values, dtype=float).ravel())
    if arr.size < 2:
        raise InsufficientData("scorer needs at least 2 values")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput("scorer sample contains non-finite values")
    arr.setflags(write=False)
    return QuantileScorer(arr)


def score(scorer: QuantileScorer, x):
    """Score one value or an array of values; returns the same shape."""
    xa = np.asarray(x, dtype=float)
    if np.isnan(xa).any():
        raise NonFiniteInput("cannot score NaN")
    s = scorer.sample
    at_most = np.searchsorted(s, xa, side="right")
    at_least = s.size - np.searchsorted(s, xa, side="left")
    # splitting ties in half instead would let a tied median outscore points just past it
    out = np.maximum(0.0, 1.0 - 2.0 * np.minimum(at_most, at_least) / s.size)
    return float(out) if out.ndim == 0 else out


def conditional_anomaly_scores(scm: "FittedScm", data: "pd.DataFrame", rows, node: str) -> np.ndarray:
    """Structural score of ``node`` on the selected ``rows`` of ``data``.

    Non-root nodes score their residual against the training residuals; roots
    fall back to their marginal value against the training values.
    """
    if node not in scm.mechanisms:
        raise UnknownNode(f"unknown node {node!r}")
    idx = np.asarray(rows)
    if idx.size == 0:
        raise EmptyRowSet("no rows to score")
    mech = scm.mechanisms[node]
    sub = data.iloc[idx] if idx.dtype.kind in "iu" else data.loc[idx]
    if mech.is_root:
        values = sub[node].to_numpy(dtype=float)
    else:
        X = sub[list(mech.parents)].to_numpy(dtype=float)
        values = sub[node].to_numpy(dtype=float) - mech.regressor.predict(X)
    return score(mech.scorer, values)


def mean_structural_score(scores) -> float:
    arr = np.asarray(scores, dtype=float)
    if arr.size == 0:
        raise EmptyInput("no scores to average")
    return float(arr.mean())
