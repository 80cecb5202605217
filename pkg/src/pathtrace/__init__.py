"""Root-cause pathway analysis over structural causal models."""

from .attribution import AttributionConfig, ContributionMatrix, attribute_anomalies, shapley
from .graph import Dag, build_dag
from .pathfinder import AnomalyReport, CausalPath, NodeScore, PathConfig, analyze, discover_paths
from .scm import FitConfig, FittedScm, fit_scm

__all__ = [
    "AnomalyReport", "AttributionConfig", "CausalPath", "ContributionMatrix", "Dag", "FitConfig",
    "FittedScm", "NodeScore", "PathConfig", "analyze", "attribute_anomalies", "build_dag",
    "discover_paths", "fit_scm", "shapley",
]
