"""Seeded synthetic retail transactions and the canonical retail causal DAG."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import InvalidDateRange
from .graph import Dag, build_dag

DATE = "ORDERDATE"
CATEGORICAL = ["MERCHANDISE_HIERARCHY", "SALES_CHANNEL", "TERRITORY", "LOYALTY_TIER", "PROMO_CODE"]
NUMERIC = [
    "PRICEEACH", "QUANTITYORDERED", "UNIT_COST", "SALES", "DISCOUNT", "NET_SALES",
    "SHIPPING_REVENUE", "COST_OF_GOODS_SOLD", "FULFILLMENT_COST", "MARKETING_COST",
    "RETURN_COST", "PROFIT", "PROFIT_MARGIN",
]
COLUMNS = [DATE, *CATEGORICAL, *NUMERIC]
TARGET = "PROFIT_MARGIN"

CANONICAL_EDGES = [
    ("PRICEEACH", "SALES"),
    ("QUANTITYORDERED", "SALES"),
    ("SALES", "DISCOUNT"),
    ("SALES", "NET_SALES"),
    ("DISCOUNT", "NET_SALES"),
    ("UNIT_COST", "COST_OF_GOODS_SOLD"),
    ("QUANTITYORDERED", "COST_OF_GOODS_SOLD"),
    ("NET_SALES", "PROFIT"),
    ("SHIPPING_REVENUE", "PROFIT"),
    ("COST_OF_GOODS_SOLD", "PROFIT"),
    ("FULFILLMENT_COST", "PROFIT"),
    ("MARKETING_COST", "PROFIT"),
    ("RETURN_COST", "PROFIT"),
    ("PROFIT", "PROFIT_MARGIN"),
    ("NET_SALES", "PROFIT_MARGIN"),
]


def canonical_dag() -> Dag:
    return build_dag(CANONICAL_EDGES)


@dataclass(frozen=True)
class Category:
    weight: float
    price_mult: float
    cost_mult: float
    return_rate: float
    paths: tuple[str, ...]


DEFAULT_CATEGORIES = {
    "Apparel": Category(0.35, 1.0, 1.0, 0.05, (
        "Apparel.Men.Shirts.Casual", "Apparel.Women.Dresses.Evening",
        "Apparel.Women.Tops.Basic", "Apparel.Kids.Outerwear.Winter")),
    "Footwear": Category(0.25, 1.4, 1.05, 0.04, (
        "Footwear.Women.Boots.Winter", "Footwear.Men.Sneakers.Running",
        "Footwear.Kids.Sandals.Summer")),
    "Beauty": Category(0.20, 0.6, 0.8, 0.02, (
        "Beauty.Skincare.Serums.Daily", "Beauty.Makeup.Lips.Matte",
        "Beauty.Fragrance.Women.Floral")),
    "Accessories": Category(0.20, 0.8, 0.9, 0.03, (
        "Accessories.Bags.Totes.Leather", "Accessories.Jewelry.Rings.Silver",
        "Accessories.Belts.Men.Classic")),
}

# channel -> (shipping flat fee, shipping rate, fulfillment mult, marketing mult)
DEFAULT_CHANNELS = {
    "Online": (4.99, 0.02, 1.0, 1.2),
    "Store": (0.0, 0.0, 0.4, 0.8),
    "Marketplace": (2.99, 0.03, 1.3, 1.5),
}
DEFAULT_TERRITORIES = {"NA": 1.0, "EMEA": 1.15, "APAC": 1.3, "LATAM": 1.2}
# tier -> discount multiplier
DEFAULT_LOYALTY = {"None": 1.0, "Silver": 1.05, "Gold": 1.15, "Platinum": 1.25}
# promo -> (probability, discount multiplier)
DEFAULT_PROMOS = {"NONE": (0.55, 0.6), "SAVE10": (0.25, 1.0), "FLASH": (0.12, 1.4), "VIP": (0.08, 1.2)}


@dataclass(frozen=True)
class GenConfig:
    start_date: dt.date = dt.date(2023, 1, 1)
    end_date: dt.date = dt.date(2023, 12, 30)
    seed: int = 42
    transactions_per_day_base: int = 200
    weekend_boost: float = 1.35
    price_mu: float = 3.4
    price_sigma: float = 0.5
    quantity_lambda: float = 2.0
    unit_cost_range: tuple[float, float] = (0.35, 0.65)
    max_discount: float = 0.30
    categories: dict = field(default_factory=lambda: dict(DEFAULT_CATEGORIES))
    channels: dict = field(default_factory=lambda: dict(DEFAULT_CHANNELS))
    territories: dict = field(default_factory=lambda: dict(DEFAULT_TERRITORIES))
    loyalty: dict = field(default_factory=lambda: dict(DEFAULT_LOYALTY))
    promos: dict = field(default_factory=lambda: dict(DEFAULT_PROMOS))

    def __post_init__(self):
        for name in ("start_date", "end_date"):
            v = getattr(self, name)
            if isinstance(v, str):
                object.__setattr__(self, name, dt.date.fromisoformat(v))
        if self.start_date > self.end_date:
            raise InvalidDateRange(f"start {self.start_date} is after end {self.end_date}")
        if self.transactions_per_day_base <= 0 or self.quantity_lambda <= 0 or self.price_sigma <= 0:
            raise InvalidDateRange("rates must be positive")


def _pick(rng, options: dict, n: int, probs=None):
    keys = list(options)
    return np.asarray(keys)[rng.choice(len(keys), size=n, p=probs)]


def _day(cfg: GenConfig, day: dt.date) -> pd.DataFrame:
    # per-day substream: any date range reproduces the same rows for a given day
    rng = np.random.default_rng([cfg.seed, day.toordinal()])
    weekend = day.weekday() >= 5
    n = int(rng.poisson(cfg.transactions_per_day_base * (cfg.weekend_boost if weekend else 1.0)))

    cat_names = list(cfg.categories)
    w = np.array([cfg.categories[c].weight for c in cat_names])
    cat_idx = rng.choice(len(cat_names), size=n, p=w / w.sum())
    cats = [cfg.categories[c] for c in cat_names]
    price_mult = np.array([c.price_mult for c in cats])[cat_idx]
    cost_mult = np.array([c.cost_mult for c in cats])[cat_idx]
    return_rate = np.array([c.return_rate for c in cats])[cat_idx]
    hierarchy = np.array([cats[i].paths[rng.integers(len(cats[i].paths))] for i in cat_idx], dtype=object)

    channel = _pick(rng, cfg.channels, n, [0.5, 0.3, 0.2] if len(cfg.channels) == 3 else None)
    territory = _pick(rng, cfg.territories, n)
    tier = _pick(rng, cfg.loyalty, n, [0.5, 0.25, 0.15, 0.1] if len(cfg.loyalty) == 4 else None)
    promo_p = np.array([p for p, _ in cfg.promos.values()])
    promo = _pick(rng, cfg.promos, n, promo_p / promo_p.sum())

    price = np.round(np.exp(rng.normal(cfg.price_mu, cfg.price_sigma, n)) * price_mult, 2)
    qty = 1 + rng.poisson(cfg.quantity_lambda, n).astype(float)
    lo, hi = cfg.unit_cost_range
    unit_cost = price * rng.uniform(lo, hi, n) * cost_mult
    sales = price * qty

    promo_mult = np.array([cfg.promos[p][1] for p in promo])
    tier_mult = np.array([cfg.loyalty[t] for t in tier])
    disc_rate = np.minimum(rng.beta(2.0, 12.0, n) * promo_mult * tier_mult, cfg.max_discount)
    discount = sales * disc_rate

    ch = [cfg.channels[c] for c in channel]
    ship_flat = np.array([c[0] for c in ch])
    ship_rate = np.array([c[1] for c in ch])
    ful_mult = np.array([c[2] for c in ch])
    mkt_mult = np.array([c[3] for c in ch])
    terr_mult = np.array([cfg.territories[t] for t in territory])

    shipping = np.where(ship_flat > 0, ship_flat + ship_rate * sales, 0.0)
    fulfillment = (2.5 + 0.35 * sales ** 0.75) * terr_mult * ful_mult * rng.lognormal(0.0, 0.15, n)
    promo_on = (promo != "NONE").astype(float)
    marketing = 0.04 * sales * mkt_mult * (1.0 + 0.5 * promo_on) * rng.lognormal(0.0, 0.2, n)
    returns = sales * return_rate * (1.0 + 0.15 * np.sqrt(qty)) * rng.lognormal(0.0, 0.3, n)

    frame = pd.DataFrame({
        DATE: pd.Timestamp(day),
        "MERCHANDISE_HIERARCHY": hierarchy,
        "SALES_CHANNEL": channel,
        "TERRITORY": territory,
        "LOYALTY_TIER": tier,
        "PROMO_CODE": promo,
        "PRICEEACH": price,
        "QUANTITYORDERED": qty,
        "UNIT_COST": unit_cost,
        "SALES": sales,
        "DISCOUNT": discount,
        "SHIPPING_REVENUE": shipping,
        "FULFILLMENT_COST": fulfillment,
        "MARKETING_COST": marketing,
        "RETURN_COST": returns,
    })
    return frame


def recompute(frame: pd.DataFrame) -> pd.DataFrame:
    """Rebuild every derived column from the source columns, in place."""
    frame["SALES"] = frame["PRICEEACH"] * frame["QUANTITYORDERED"]
    frame["NET_SALES"] = frame["SALES"] - frame["DISCOUNT"]
    frame["COST_OF_GOODS_SOLD"] = frame["UNIT_COST"] * frame["QUANTITYORDERED"]
    frame["PROFIT"] = (frame["NET_SALES"] + frame["SHIPPING_REVENUE"] - frame["COST_OF_GOODS_SOLD"]
                       - frame["FULFILLMENT_COST"] - frame["MARKETING_COST"] - frame["RETURN_COST"])
    frame["PROFIT_MARGIN"] = frame["PROFIT"] / frame["NET_SALES"]
    return frame


def generate(cfg: GenConfig | None = None) -> pd.DataFrame:
    cfg = cfg or GenConfig()
    days = pd.date_range(cfg.start_date, cfg.end_date, freq="D")
    parts = [_day(cfg, d.date()) for d in days]
    frame = pd.concat(parts, ignore_index=True)
    # SALES is already price*qty; recompute keeps every identity in one place
    frame = recompute(frame)
    return frame[COLUMNS]


def top_category(hierarchy: pd.Series) -> pd.Series:
    return hierarchy.str.split(".", n=1).str[0]


def read_csv(path) -> pd.DataFrame:
    # "NA" is a territory and "None" a loyalty tier, not missing values;
    # round_trip parsing makes %.17g output reload bit-for-bit
    return pd.read_csv(path, parse_dates=[DATE], keep_default_na=False, float_precision="round_trip",
                       dtype={c: float for c in NUMERIC})


def write_csv(frame: pd.DataFrame, path) -> None:
    frame.to_csv(path, index=False, date_format="%Y-%m-%d", float_format="%.17g")
