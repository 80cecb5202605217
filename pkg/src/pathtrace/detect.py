"""Daily aggregation and IQR flagging of anomalous dates."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np
import pandas as pd

from .datagen import DATE, TARGET
from .errors import EmptyDataset, SeriesTooShort

MONEY = ["SALES", "DISCOUNT", "NET_SALES", "SHIPPING_REVENUE", "COST_OF_GOODS_SOLD",
         "FULFILLMENT_COST", "MARKETING_COST", "RETURN_COST", "PROFIT"]


def aggregate_daily(data: pd.DataFrame) -> pd.DataFrame:
    """One row per date. Sums for money and quantity, quantity-weighted means
    for unit prices, and PROFIT_MARGIN rebuilt from the summed numerator and
    denominator."""
    if data.empty:
        raise EmptyDataset("nothing to aggregate")
    frame = data.assign(
        **{DATE: pd.to_datetime(data[DATE]).dt.normalize(),
           "_PQ": data["PRICEEACH"] * data["QUANTITYORDERED"],
           "_CQ": data["UNIT_COST"] * data["QUANTITYORDERED"]})
    cols = [c for c in MONEY if c in frame.columns]
    agg = frame.groupby(DATE, sort=True)[cols + ["QUANTITYORDERED", "_PQ", "_CQ"]].sum()
    agg["PRICEEACH"] = agg.pop("_PQ") / agg["QUANTITYORDERED"]
    agg["UNIT_COST"] = agg.pop("_CQ") / agg["QUANTITYORDERED"]
    agg[TARGET] = agg["PROFIT"] / agg["NET_SALES"]
    return agg.reset_index()


@dataclass
class DailySeries:
    dates: list[dt.date]
    values: np.ndarray

    @classmethod
    def from_frame(cls, agg: pd.DataFrame, column: str = TARGET, date_col: str = DATE) -> "DailySeries":
        dates = [d.date() for d in pd.to_datetime(agg[date_col])]
        return cls(dates, agg[column].to_numpy(dtype=float))


@dataclass
class DetectionResult:
    dates: list[dt.date]
    values: dict = field(default_factory=dict)
    low: float = 0.0
    high: float = 0.0

    def to_json(self) -> dict:
        return {"dates": [d.isoformat() for d in self.dates],
                "values": {d.isoformat(): v for d, v in self.values.items()},
                "fences": {"low": self.low, "high": self.high}}


def detect_iqr(series: DailySeries, c: float = 3.0) -> DetectionResult:
    """Flag values outside ``[Q1 - c*IQR, Q3 + c*IQR]`` using whole-series
    quartiles (linear interpolation). With IQR == 0 anything != Q1 is flagged."""
    v = np.asarray(series.values, dtype=float)
    if v.size < 8:
        raise SeriesTooShort(f"need at least 8 points, got {v.size}")
    if c <= 0:
        raise ValueError("c must be positive")
    q1, q3 = np.quantile(v, [0.25, 0.75])
    iqr = q3 - q1
    low, high = q1 - c * iqr, q3 + c * iqr
    flags = (v != q1) if iqr == 0 else (v < low) | (v > high)
    dates = [d for d, f in zip(series.dates, flags) if f]
    return DetectionResult(dates, {d: float(x) for d, x, f in zip(series.dates, v, flags) if f},
                           float(low), float(high))


def plot_series(series: DailySeries, flagged=(), width: int = 900, height: int = 360) -> str:
    """Deterministic SVG line chart; flagged dates drawn as red circles."""
    v = np.asarray(series.values, dtype=float)
    pad = 40
    n = len(v)
    lo, hi = (float(v.min()), float(v.max())) if n else (0.0, 1.0)
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0

    def xy(i, y):
        x = pad + (width - 2 * pad) * (i / max(n - 1, 1))
        return x, height - pad - (height - 2 * pad) * (y - lo) / (hi - lo)

    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in (xy(i, y) for i, y in enumerate(v)))
    flagged = set(flagged)
    marks = []
    for i, (d, y) in enumerate(zip(series.dates, v)):
        if d in flagged:
            x, yy = xy(i, y)
            marks.append(f'<circle class="anomaly" cx="{x:.2f}" cy="{yy:.2f}" r="4" fill="red">'
                         f"<title>{escape(d.isoformat())}</title></circle>")
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{pad}" y="20" font-size="14">{escape(TARGET)} daily series</text>',
        f'<text x="4" y="{pad}" font-size="10">{hi:.4g}</text>',
        f'<text x="4" y="{height - pad}" font-size="10">{lo:.4g}</text>',
        f'<polyline fill="none" stroke="steelblue" stroke-width="1" points="{pts}"/>',
        *marks,
        "</svg>",
    ]
    return "\n".join(parts) + "\n"
