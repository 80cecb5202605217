"""Combined node scores, threshold-gated path search toward the roots, and
path ranking by causal significance."""

from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .attribution import (AttributionConfig, ContributionMatrix, attribute_anomalies,
                          max_abs_contribution, mean_contribution)
from .datagen import DATE, TARGET
from .errors import ConfigError, DateNotFound, MissingScore, PathTooShort, UnknownNode
from .graph import Dag
from .scm import FittedScm
from .scoring import conditional_anomaly_scores, mean_structural_score

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PathConfig:
    alpha: float = 0.7
    beta: float = 0.7
    theta: float = 0.8
    gamma: float = 0.7
    max_depth: int = 16

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.theta < 0:
            raise ConfigError("theta must be non-negative")
        if self.max_depth < 1:
            raise ConfigError("max_depth must be positive")


@dataclass(frozen=True)
class NodeScore:
    node: str
    mean_structural: float
    max_abs_noise: float
    combined: float

    @classmethod
    def build(cls, node: str, mean_structural: float, max_abs_noise: float, alpha: float) -> "NodeScore":
        return cls(node, mean_structural, max_abs_noise, combined_score(mean_structural, max_abs_noise, alpha))


@dataclass
class CausalPath:
    nodes: list[str]
    scores: list[NodeScore] = field(default_factory=list)
    consistency: float = 0.0
    terminal_mean_noise: float = 0.0
    significance: float = 0.0

    @property
    def terminal(self) -> str:
        return self.nodes[-1]

    def rank_key(self):
        return (-self.significance, len(self.nodes), self.nodes)

    def to_json(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "scores": [vars(s).copy() for s in self.scores],
            "consistency": self.consistency,
            "terminal_mean_noise": self.terminal_mean_noise,
            "significance": self.significance,
        }

    def __str__(self) -> str:
        return " -> ".join(self.nodes)


@dataclass
class AnomalyReport:
    date: dt.date
    n_rows: int
    paths: list[CausalPath]
    node_scores: dict[str, NodeScore]
    contributions: ContributionMatrix | None = field(default=None, repr=False)

    @property
    def top(self) -> CausalPath | None:
        return self.paths[0] if self.paths else None

    def to_json(self) -> dict:
        return {
            "date": self.date.isoformat(),
            "n_rows": self.n_rows,
            "paths": [p.to_json() for p in self.paths],
            "node_scores": {n: vars(s).copy() for n, s in sorted(self.node_scores.items())},
        }


def combined_score(mean_structural: float, max_abs_noise: float, alpha: float = 0.7) -> float:
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError("alpha must lie in [0, 1]")
    return alpha * mean_structural + (1.0 - alpha) * max_abs_noise


def path_significance(terminal_mean_noise: float, consistency: float, gamma: float = 0.7) -> float:
    if not 0.0 <= gamma <= 1.0:
        raise ConfigError("gamma must lie in [0, 1]")
    return gamma * terminal_mean_noise + (1.0 - gamma) * consistency


def abs_pearson(a, b) -> float:
    """|corr(a, b)|, or 0 when undefined (fewer than 2 samples or a constant vector)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or a.size != b.size or np.all(a == a[0]) or np.all(b == b[0]):
        return 0.0
    da, db = a - a.mean(), b - b.mean()
    # scale first so the products below cannot overflow or underflow
    da /= np.max(np.abs(da))
    db /= np.max(np.abs(db))
    den = np.sqrt(np.dot(da, da) * np.dot(db, db))
    if den == 0:
        return 0.0
    return float(min(1.0, abs(np.dot(da, db)) / den))


def path_consistency(cm: ContributionMatrix, path) -> float:
    """Mean |Pearson| between contribution vectors of adjacent path nodes."""
    path = list(path)
    if len(path) < 2:
        raise PathTooShort("consistency needs at least two nodes")
    rhos = [abs_pearson(cm[u], cm[v]) for u, v in zip(path, path[1:])]
    return float(np.mean(rhos))


def _combined(scores, node):
    s = scores.get(node)
    if s is None:
        raise MissingScore(f"no score for {node!r}")
    return s.combined if isinstance(s, NodeScore) else float(s)


def discover_paths(dag: Dag, scores: dict, target: str, cfg: PathConfig | None = None) -> list[CausalPath]:
    """Depth-first search from ``target`` along parent edges.

    A parent can extend a path when its combined score reaches ``beta*theta``;
    a path can end at a node whose score reaches ``theta``. Only maximal
    accepted paths are returned: those no accepted path extends further. The
    target itself is never gated. ``scores`` maps node to NodeScore or to a
    bare combined score.
    """
    cfg = cfg or PathConfig()
    if target not in dag:
        raise UnknownNode(f"unknown node {target!r}")
    gate = cfg.beta * cfg.theta
    found: list[list[str]] = []

    def visit(path: list[str]) -> bool:
        """Explore below ``path``; True if some accepted path was emitted beneath it."""
        node = path[-1]
        emitted_below = False
        if len(path) - 1 < cfg.max_depth:
            for par in dag.parents(node):
                if par in path or _combined(scores, par) < gate:
                    continue
                if visit(path + [par]):
                    emitted_below = True
        if emitted_below:
            return True
        if len(path) > 1 and _combined(scores, node) >= cfg.theta:
            found.append(list(path))
            return True
        return False

    visit([target])
    return [CausalPath(p, [scores[n] for n in p] if all(isinstance(scores[n], NodeScore) for n in p) else [])
            for p in found]


def rank_paths(paths: list[CausalPath]) -> list[CausalPath]:
    return sorted(paths, key=CausalPath.rank_key)


def score_paths(paths: list[CausalPath], cm: ContributionMatrix, gamma: float) -> list[CausalPath]:
    for p in paths:
        p.consistency = path_consistency(cm, p.nodes)
        p.terminal_mean_noise = mean_contribution(cm, p.terminal)
        p.significance = path_significance(p.terminal_mean_noise, p.consistency, gamma)
    return rank_paths(paths)


def anomaly_rows(data: pd.DataFrame, date) -> np.ndarray:
    """Positional indices of every transaction on ``date``."""
    day = pd.Timestamp(date).normalize()
    rows = np.flatnonzero(pd.to_datetime(data[DATE]).dt.normalize().to_numpy() == day.to_datetime64())
    if rows.size == 0:
        raise DateNotFound(f"no rows dated {day.date()}")
    return rows


def node_scores(scm: FittedScm, data: pd.DataFrame, rows, cm: ContributionMatrix,
                alpha: float) -> dict[str, NodeScore]:
    out = {}
    for node in cm.nodes:
        s_bar = mean_structural_score(conditional_anomaly_scores(scm, data, rows, node))
        out[node] = NodeScore.build(node, s_bar, max_abs_contribution(cm, node), alpha)
    return out


def report_for(date, rows, scores: dict[str, NodeScore], cm: ContributionMatrix,
               dag: Dag, target: str, cfg: PathConfig) -> AnomalyReport:
    """Path search and ranking over precomputed scores; cheap to repeat per threshold."""
    rescored = {n: NodeScore.build(n, s.mean_structural, s.max_abs_noise, cfg.alpha) for n, s in scores.items()}
    paths = score_paths(discover_paths(dag, rescored, target, cfg), cm, cfg.gamma)
    return AnomalyReport(pd.Timestamp(date).date(), int(len(rows)), paths, rescored, cm)


def analyze(scm: FittedScm, data: pd.DataFrame, dates, cfg: PathConfig | None = None,
            acfg: AttributionConfig | None = None, target: str = TARGET) -> dict[dt.date, AnomalyReport]:
    """Root-cause report for each date: structural and noise scores for the
    target and its ancestors, accepted pathways, and their ranking."""
    cfg = cfg or PathConfig()
    acfg = acfg or AttributionConfig()
    reports = {}
    for date in dates:
        rows = anomaly_rows(data, date)
        cm = attribute_anomalies(scm, target, data, rows, acfg)
        scores = node_scores(scm, data, rows, cm, cfg.alpha)
        rep = report_for(date, rows, scores, cm, scm.dag, target, cfg)
        log.info("%s: %d rows, %d paths", rep.date, rep.n_rows, len(rep.paths))
        reports[rep.date] = rep
    return reports
