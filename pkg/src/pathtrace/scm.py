"""Additive-noise structural causal model: fitting, noise extraction and
forward propagation over a :class:`~pathtrace.graph.Dag`."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import regressors
from .errors import ArityMismatch, InsufficientData, MissingColumn, MissingNoise, PathtraceError
from .graph import Dag, build_dag
from .scoring import QuantileScorer, fit_scorer

SCHEMA_VERSION = 1
MIN_ROWS = 20


@dataclass(frozen=True)
class FitConfig:
    folds: int = 5
    seed: int = 0
    candidates: tuple = regressors.CANDIDATES


@dataclass
class CausalMechanism:
    """Root: empirical distribution of the node. Non-root: regressor on the
    parents plus the empirical distribution of its training residuals."""

    node: str
    parents: tuple[str, ...]
    sample: np.ndarray  # sorted training values (root) or residuals
    regressor: object = None
    cv_rmse: float = 0.0
    cv_scores: dict = field(default_factory=dict)
    values: np.ndarray | None = None  # sorted training values of the node itself
    _scorer: QuantileScorer | None = field(default=None, repr=False)

    @property
    def is_root(self) -> bool:
        return not self.parents

    @property
    def kind(self) -> str:
        return "RootEmpirical" if self.is_root else "AdditiveNoise"

    _marginal: QuantileScorer | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.values is None:
            self.values = self.sample

    @property
    def scorer(self) -> QuantileScorer:
        """Scorer over the noise sample (residuals, or values for roots)."""
        if self._scorer is None:
            self._scorer = fit_scorer(self.sample)
        return self._scorer

    @property
    def marginal_scorer(self) -> QuantileScorer:
        """Scorer over the node's own training values."""
        if self._marginal is None:
            self._marginal = fit_scorer(self.values)
        return self._marginal

    def predict(self, parent_values) -> np.ndarray:
        return predict(self, parent_values)


@dataclass
class FittedScm:
    dag: Dag
    mechanisms: dict[str, CausalMechanism]
    seed: int = 0
    folds: int = 5

    @property
    def metadata(self) -> dict:
        return {
            "seed": self.seed,
            "folds": self.folds,
            "models": {n: (m.regressor.name if m.regressor else "empirical")
                       for n, m in sorted(self.mechanisms.items())},
            "cv_rmse": {n: m.cv_rmse for n, m in sorted(self.mechanisms.items()) if not m.is_root},
        }

    def to_json(self) -> dict:
        return {
            "version": SCHEMA_VERSION,
            "seed": self.seed,
            "folds": self.folds,
            "edges": [list(e) for e in sorted(self.dag.edges)],
            "nodes": sorted(self.dag.nodes),
            "mechanisms": {
                n: {
                    "kind": m.kind,
                    "parents": list(m.parents),
                    "sample": m.sample.tolist(),
                    "values": None if m.is_root else m.values.tolist(),
                    "cv_rmse": m.cv_rmse,
                    "cv_scores": m.cv_scores,
                    "model": regressors.to_dict(m.regressor) if m.regressor else None,
                }
                for n, m in sorted(self.mechanisms.items())
            },
        }

    @classmethod
    def from_json(cls, doc: dict) -> "FittedScm":
        if doc.get("version") != SCHEMA_VERSION:
            raise PathtraceError(f"unsupported SCM document version {doc.get('version')!r}")
        dag = build_dag([tuple(e) for e in doc["edges"]], doc["nodes"])
        mechs = {}
        for n, m in doc["mechanisms"].items():
            mechs[n] = CausalMechanism(
                node=n,
                parents=tuple(m["parents"]),
                sample=np.asarray(m["sample"], dtype=float),
                regressor=regressors.from_dict(m["model"]) if m["model"] else None,
                cv_rmse=m["cv_rmse"],
                cv_scores=m["cv_scores"],
                values=None if m["values"] is None else np.asarray(m["values"], dtype=float),
            )
        return cls(dag, mechs, doc["seed"], doc["folds"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "FittedScm":
        return cls.from_json(json.loads(Path(path).read_text()))


def _require_columns(data: pd.DataFrame, names) -> None:
    missing = [n for n in names if n not in data.columns]
    if missing:
        raise MissingColumn(f"missing columns: {', '.join(sorted(missing))}")


def block_folds(n: int, folds: int) -> list[np.ndarray]:
    """Contiguous row blocks used as validation folds."""
    return np.array_split(np.arange(n), folds)


def select_mechanism(X, y, candidates=regressors.CANDIDATES, folds: int = 5, seed: int = 0):
    """Pick the candidate with the lowest mean out-of-fold RMSE and refit it on
    every row. Returns ``(model, cv_rmse, {name: cv_rmse})``.

    Earlier candidates win ties; a later one must improve by more than a
    rounding-level margin so exact fits do not flip on float noise.
    """
    X = np.asarray(X, dtype=float)
    X = X.reshape(-1, 1) if X.ndim == 1 else X
    y = np.asarray(y, dtype=float)
    n = y.size
    if folds < 2 or n < folds:
        raise InsufficientData(f"need at least {max(folds, 2)} rows for {folds}-fold CV")
    blocks = block_folds(n, folds)
    tol = 1e-9 * max(float(np.std(y)), np.finfo(float).tiny)
    scores: dict[str, float] = {}
    best, best_rmse = None, np.inf
    for cand in candidates:
        fold_rmse = []
        for val in blocks:
            train = np.ones(n, dtype=bool)
            train[val] = False
            model = cand().fit(X[train], y[train])
            err = y[val] - model.predict(X[val])
            fold_rmse.append(np.sqrt(np.mean(err * err)))
        rmse = float(np.mean(fold_rmse))
        scores[cand.name] = rmse
        if best is None or rmse < best_rmse - tol:
            best, best_rmse = cand, rmse
    return best().fit(X, y), best_rmse, scores


def fit_scm(dag: Dag, data: pd.DataFrame, config: FitConfig | None = None) -> FittedScm:
    """Fit one mechanism per node. Roots keep their empirical distribution;
    non-roots get the cross-validated regressor plus training residuals."""
    config = config or FitConfig()
    _require_columns(data, dag.nodes)
    if len(data) < MIN_ROWS:
        raise InsufficientData(f"need at least {MIN_ROWS} rows, got {len(data)}")
    mechs = {}
    for node in dag.topological_order():
        pars = tuple(dag.parents(node))
        y = data[node].to_numpy(dtype=float)
        if not pars:
            mechs[node] = CausalMechanism(node, pars, np.sort(y))
            continue
        X = data[list(pars)].to_numpy(dtype=float)
        if np.all(y == y[0]):
            model, rmse, scores = regressors.ConstantMean(y[0]), 0.0, {"constant": 0.0}
        else:
            model, rmse, scores = select_mechanism(X, y, config.candidates, config.folds, config.seed)
        resid = y - model.predict(X)
        mechs[node] = CausalMechanism(node, pars, np.sort(resid), model, rmse, scores, np.sort(y))
    return FittedScm(dag, mechs, config.seed, config.folds)


def predict(mech: CausalMechanism, parent_values) -> np.ndarray:
    """Regressor output for one parent vector (1-D) or a batch (2-D)."""
    if mech.is_root:
        raise ArityMismatch(f"{mech.node} is a root and has no regressor")
    X = np.asarray(parent_values, dtype=float)
    single = X.ndim == 1
    X = X.reshape(1, -1) if single else X
    if X.shape[1] != len(mech.parents):
        raise ArityMismatch(f"{mech.node} expects {len(mech.parents)} parent values, got {X.shape[1]}")
    out = mech.regressor.predict(X)
    return float(out[0]) if single else out


def extract_noise(scm: FittedScm, data: pd.DataFrame) -> dict[str, np.ndarray]:
    """Per-node noise: observed minus prediction, or the observed value for roots."""
    _require_columns(data, scm.mechanisms)
    noise = {}
    for node, mech in scm.mechanisms.items():
        y = data[node].to_numpy(dtype=float)
        if mech.is_root:
            noise[node] = y.copy()
        else:
            noise[node] = y - mech.regressor.predict(data[list(mech.parents)].to_numpy(dtype=float))
    return noise


def propagate(scm: FittedScm, noise: dict, nodes=None) -> dict:
    """Forward pass in topological order. Values may be scalars or equal-length
    arrays (one entry per counterfactual sample). ``nodes`` restricts the
    pass to an ancestrally closed subset."""
    order = scm.dag.topological_order()
    if nodes is not None:
        keep = set(nodes)
        order = [n for n in order if n in keep]
    missing = [n for n in order if n not in noise]
    if missing:
        raise MissingNoise(f"no noise value for: {', '.join(missing)}")
    scalar = all(np.ndim(noise[n]) == 0 for n in order)
    size = max((np.size(noise[n]) for n in order), default=1)
    values: dict[str, np.ndarray] = {}
    for node in order:
        mech = scm.mechanisms[node]
        eps = np.broadcast_to(np.asarray(noise[node], dtype=float), (size,))
        if mech.is_root:
            values[node] = eps
        else:
            X = np.column_stack([values[p] for p in mech.parents])
            values[node] = mech.regressor.predict(X) + eps
    if scalar:
        return {n: float(v[0]) for n, v in values.items()}
    return values


def sample_noise(mech: CausalMechanism, count: int, seed) -> np.ndarray:
    """Bootstrap draws from the mechanism's stored sample."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if count <= 0:
        return np.empty(0)
    return mech.sample[rng.integers(0, mech.sample.size, size=count)]
