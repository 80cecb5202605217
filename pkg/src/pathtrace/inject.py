"""Scheduled anomaly injection on transaction data."""

from __future__ import annotations

import datetime as dt
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .datagen import DATE, recompute, top_category
from .errors import ConfigError, UnknownKind

log = logging.getLogger(__name__)

KINDS = ("ExcessiveDiscount", "COGSOverstatement", "FulfillmentSpike", "ReturnSurge")
ALIASES = {"Discount": "ExcessiveDiscount", "COGs": "COGSOverstatement", "COGS": "COGSOverstatement",
           "Fulfill": "FulfillmentSpike", "Return": "ReturnSurge"}


@dataclass(frozen=True)
class AnomalySpec:
    date: dt.date
    kind: str
    severity: float
    scope: str

    def __post_init__(self):
        kind = ALIASES.get(self.kind, self.kind)
        if kind not in KINDS:
            raise UnknownKind(f"unknown anomaly kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if isinstance(self.date, str):
            object.__setattr__(self, "date", dt.date.fromisoformat(self.date))

    def to_json(self) -> dict:
        return {"kind": self.kind, "severity": self.severity, "scope": self.scope}


class AnomalySchedule(list):
    """List of :class:`AnomalySpec`, at most one per (date, scope)."""

    def __init__(self, specs=()):
        super().__init__(specs)
        keys = [(s.date, s.scope) for s in self]
        if len(keys) != len(set(keys)):
            raise ConfigError("schedule has more than one anomaly for the same date and scope")

    @classmethod
    def from_json(cls, doc: dict) -> "AnomalySchedule":
        specs = []
        for date, entry in doc.items():
            if isinstance(entry, (list, tuple)):
                kind, severity, scope = entry
            else:
                kind, severity, scope = entry["kind"], entry["severity"], entry["scope"]
            specs.append(AnomalySpec(date, kind, float(severity), scope))
        return cls(specs)

    def to_json(self) -> dict:
        return {s.date.isoformat(): s.to_json() for s in self}

    @classmethod
    def load(cls, path) -> "AnomalySchedule":
        return cls.from_json(json.loads(Path(path).read_text()))

    @property
    def dates(self) -> list[dt.date]:
        return sorted({s.date for s in self})


# The four anomalies of the reference retail experiment.
REFERENCE_SCHEDULE = {
    "2023-01-10": ("Discount", 0.6, "Apparel"),
    "2023-06-10": ("COGs", -0.8, "Footwear"),
    "2023-09-10": ("Fulfill", -2, "Beauty"),
    "2023-12-10": ("Return", 10, "Accessories"),
}


def reference_schedule() -> AnomalySchedule:
    return AnomalySchedule.from_json(REFERENCE_SCHEDULE)


def _apply(frame: pd.DataFrame, idx: np.ndarray, spec: AnomalySpec, jitter: np.ndarray) -> None:
    s = spec.severity
    if spec.kind == "ExcessiveDiscount":
        sales = frame.loc[idx, "SALES"].to_numpy()
        frame.loc[idx, "DISCOUNT"] = sales * np.minimum(0.95, s + jitter)
    elif spec.kind == "COGSOverstatement":
        frame.loc[idx, "UNIT_COST"] = frame.loc[idx, "UNIT_COST"].to_numpy() * (1 + abs(s) * (1 + jitter))
    elif spec.kind == "FulfillmentSpike":
        frame.loc[idx, "FULFILLMENT_COST"] = (frame.loc[idx, "FULFILLMENT_COST"].to_numpy()
                                              * (1 + abs(s)) ** 2 * (1 + jitter))
    elif spec.kind == "ReturnSurge":
        frame.loc[idx, "RETURN_COST"] = frame.loc[idx, "RETURN_COST"].to_numpy() * s * (1 + jitter)


def inject(data: pd.DataFrame, schedule: AnomalySchedule, seed: int = 0) -> pd.DataFrame:
    """Return a copy of ``data`` with every scheduled anomaly applied.

    Only rows matching both the date and the scope (top-level merchandise
    category or sales channel) change; their derived metrics are recomputed.
    ``out.attrs["injection"]`` lists per-spec row counts, warnings, and rows
    whose NET_SALES dropped to zero or below.
    """
    out = data.copy()
    dates = pd.to_datetime(out[DATE]).dt.date.to_numpy()
    category = top_category(out["MERCHANDISE_HIERARCHY"]).to_numpy()
    channel = out["SALES_CHANNEL"].to_numpy()
    report = {"applied": [], "warnings": [], "guarded_rows": []}
    touched = np.zeros(len(out), dtype=bool)
    for k, spec in enumerate(schedule):
        mask = (dates == spec.date) & ((category == spec.scope) | (channel == spec.scope))
        idx = out.index[mask]
        if len(idx) == 0:
            msg = f"ScopeMatchesNoRows: {spec.date} {spec.scope}"
            log.warning(msg)
            report["warnings"].append(msg)
            continue
        rng = np.random.default_rng([seed, spec.date.toordinal(), KINDS.index(spec.kind)])
        jitter = rng.uniform(-0.05, 0.05, len(idx))
        _apply(out, idx, spec, jitter)
        touched |= mask
        report["applied"].append({**spec.to_json(), "date": spec.date.isoformat(), "rows": int(len(idx))})

    if touched.any():
        sub = recompute(out.loc[touched].copy())
        bad = sub["NET_SALES"] <= 0
        if bad.any():
            sub.loc[bad, "PROFIT_MARGIN"] = sub.loc[bad, "PROFIT"] / np.maximum(sub.loc[bad, "NET_SALES"], 1.0)
            report["guarded_rows"] = [int(i) for i in sub.index[bad]]
        out.loc[touched, sub.columns] = sub
    out.attrs["injection"] = report
    return out
