"""Pipeline configuration and the stages behind the CLI:
generate -> inject -> detect -> fit -> analyze -> report."""

from __future__ import annotations

import json
import os
import tempfile
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import pandas as pd

from . import datagen, detect, graph, report
from .attribution import AttributionConfig
from .datagen import GenConfig, TARGET
from .errors import ConfigError
from .inject import AnomalySchedule, REFERENCE_SCHEDULE, inject
from .pathfinder import PathConfig, analyze
from .scm import FitConfig, FittedScm, fit_scm

SEED_ENV = "PATHTRACE_SEED"

FILES = {
    "data": "transactions.csv",
    "injected": "transactions_injected.csv",
    "schedule": "schedule.json",
    "daily": "daily.csv",
    "detection": "detection.json",
    "chart": "profit_margin.svg",
    "scm": "scm.json",
    "dot": "dag.dot",
    "analysis": "analysis.json",
    "report": "report.txt",
}


@dataclass
class PipelineConfig:
    out_dir: Path = Path("out")
    seed: int = 42
    start_date: str = "2023-01-01"
    end_date: str = "2023-12-30"
    transactions_per_day_base: int = 200
    schedule: dict = field(default_factory=lambda: dict(REFERENCE_SCHEDULE))
    edges: list | str | None = None
    detector_c: float = 3.0
    target: str = TARGET
    path: PathConfig = field(default_factory=PathConfig)
    attribution: AttributionConfig = field(default_factory=AttributionConfig)
    folds: int = 5
    dates: list | None = None  # analyse these instead of the detected dates

    def path_of(self, key: str) -> Path:
        return Path(self.out_dir) / FILES[key]

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        doc = dict(doc)
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if "path" in doc:
            doc["path"] = PathConfig(**doc["path"])
        if "attribution" in doc:
            doc["attribution"] = AttributionConfig(**doc["attribution"])
        if "out_dir" in doc:
            doc["out_dir"] = Path(doc["out_dir"])
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def resolved(self, **overrides) -> "PipelineConfig":
        """Layer settings: CLI overrides beat the seed environment variable,
        which beats the config file."""
        path_over = {k: overrides.pop(k) for k in ("theta", "alpha", "beta", "gamma") if k in overrides}
        path_over = {k: v for k, v in path_over.items() if v is not None}
        env = os.environ.get(SEED_ENV)
        cfg = replace(self, seed=int(env)) if env else replace(self)
        cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
        if path_over:
            cfg.path = replace(cfg.path, **path_over)
        cfg.attribution = replace(cfg.attribution, seed=cfg.seed)
        return cfg

    def gen_config(self) -> GenConfig:
        return GenConfig(start_date=self.start_date, end_date=self.end_date, seed=self.seed,
                         transactions_per_day_base=self.transactions_per_day_base)

    def dag(self) -> graph.Dag:
        if self.edges is None:
            return datagen.canonical_dag()
        if isinstance(self.edges, str):
            return graph.load_edges(self.edges)
        return graph.build_dag([tuple(e) for e in self.edges])


@contextmanager
def atomic_write(path: Path, mode: str = "w"):
    """Write to a sibling temp file and move it into place only on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_json(path: Path, doc) -> None:
    with atomic_write(path) as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_text(path: Path, text: str) -> None:
    with atomic_write(path) as fh:
        fh.write(text)


def write_frame(path: Path, frame: pd.DataFrame) -> None:
    with atomic_write(path) as fh:
        datagen.write_csv(frame, fh)


def _need(path: Path) -> Path:
    if not path.exists():
        raise ConfigError(f"missing upstream artifact {path}; run the earlier stage first")
    return path


def stage_generate(cfg: PipelineConfig) -> pd.DataFrame:
    frame = datagen.generate(cfg.gen_config())
    write_frame(cfg.path_of("data"), frame)
    return frame


def stage_inject(cfg: PipelineConfig, frame: pd.DataFrame | None = None) -> pd.DataFrame:
    if frame is None:
        frame = datagen.read_csv(_need(cfg.path_of("data")))
    schedule = AnomalySchedule.from_json(cfg.schedule)
    out = inject(frame, schedule, seed=cfg.seed)
    write_frame(cfg.path_of("injected"), out)
    write_json(cfg.path_of("schedule"), {"schedule": schedule.to_json(), "result": out.attrs["injection"]})
    return out


def stage_detect(cfg: PipelineConfig, frame: pd.DataFrame | None = None) -> detect.DetectionResult:
    if frame is None:
        frame = datagen.read_csv(_need(cfg.path_of("injected")))
    daily = detect.aggregate_daily(frame)
    series = detect.DailySeries.from_frame(daily, cfg.target)
    result = detect.detect_iqr(series, cfg.detector_c)
    write_frame(cfg.path_of("daily"), daily)
    write_json(cfg.path_of("detection"), result.to_json())
    write_text(cfg.path_of("chart"), detect.plot_series(series, result.dates))
    return result


def stage_fit(cfg: PipelineConfig, frame: pd.DataFrame | None = None) -> FittedScm:
    if frame is None:
        frame = datagen.read_csv(_need(cfg.path_of("injected")))
    dag = cfg.dag()
    scm = fit_scm(dag, frame, FitConfig(folds=cfg.folds, seed=cfg.seed))
    with atomic_write(cfg.path_of("scm")) as fh:
        json.dump(scm.to_json(), fh)
    write_text(cfg.path_of("dot"), graph.to_dot(dag))
    return scm


def analysis_dates(cfg: PipelineConfig) -> list[str]:
    if cfg.dates:
        return list(cfg.dates)
    return json.loads(_need(cfg.path_of("detection")).read_text())["dates"]


def stage_analyze(cfg: PipelineConfig, frame: pd.DataFrame | None = None,
                  scm: FittedScm | None = None) -> dict:
    if frame is None:
        frame = datagen.read_csv(_need(cfg.path_of("injected")))
    if scm is None:
        scm = FittedScm.load(_need(cfg.path_of("scm")))
    reports = analyze(scm, frame, analysis_dates(cfg), cfg.path, cfg.attribution, cfg.target)
    doc = report.build_document(reports, cfg.target, cfg.path, cfg.attribution, scm.metadata)
    write_json(cfg.path_of("analysis"), doc)
    return doc


def stage_report(cfg: PipelineConfig) -> str:
    doc = json.loads(_need(cfg.path_of("analysis")).read_text())
    if doc.get("version") != report.REPORT_VERSION:
        raise ConfigError(f"unsupported report version {doc.get('version')!r}")
    text = report.render_text(doc)
    write_text(cfg.path_of("report"), text)
    return text


def run_all(cfg: PipelineConfig) -> dict:
    frame = stage_inject(cfg, stage_generate(cfg))
    stage_detect(cfg, frame)
    scm = stage_fit(cfg, frame)
    doc = stage_analyze(cfg, frame, scm)
    stage_report(cfg)
    return doc


def config_dict(cfg: PipelineConfig) -> dict:
    d = asdict(cfg)
    d["out_dir"] = str(cfg.out_dir)
    return d
