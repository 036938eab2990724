"""Liquidity metrics computed per minute bucket.

Notation, for a bucket t and its predecessor t-1 within the same ticker-day:

    P_t  first trade price        v_t  first trade size
    A    average ask price        B    average bid price
    Qa   average ask size         Qb   average bid size
    M    quote midpoint (A+B)/2
    r_t  ln(P_t / P_{t-1})        dt   first-trade time gap in seconds

The seventeen metrics:

    spread                A - B
    effective_spread      2 * |P_t - M|
    rel_spread_mid        (A - B) / M
    rel_spread_log        ln(A / B)
    rel_effective_spread  2 * |P_t - M| / P_t
    depth                 (Qa + Qb) / 2
    log_depth             ln(Qa) + ln(Qb)
    dollar_depth          (Qa * A + Qb * B) / 2
    quote_slope           (A - B) / log_depth
    log_quote_slope       ln(A / B) / log_depth
    adj_log_quote_slope   log_quote_slope * (1 + |ln(Qb / Qa)|)
    composite_liquidity   rel_spread_mid / dollar_depth
    turnover              P_t * v_t
    amivest_ratio         turnover / |r_t|
    amihud_illiq          |r_t| / turnover
    flow_ratio            turnover / dt
    order_ratio           |Qb - Qa| / turnover

Masking semantics: every metric carries a validity flag. A metric that
cannot be computed (no previous bucket for r_t or dt, log_depth of exactly
zero for the three slope metrics, r_t == 0 for the Amivest ratio, or any
non-finite outcome) is stored as sentinel 0.0 with its flag False. NaN never
enters a feature vector. When r_t == 0 the Amihud illiquidity is a true 0
and stays valid.

Each op below returns a plain dict holding only the metrics that came out
valid; absence means masked. ``compute_feature_vector`` merges the four
groups into the fixed-width :class:`FeatureVector`.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, fields
from typing import IO, Iterable, Mapping, Sequence

from .errors import DataError, MalformedHeader
from .sampler import MinuteBucket
from .util import atomic_write_text

METRIC_NAMES = (
    "spread", "effective_spread", "rel_spread_mid", "rel_spread_log",
    "rel_effective_spread", "depth", "log_depth", "dollar_depth",
    "quote_slope", "log_quote_slope", "adj_log_quote_slope",
    "composite_liquidity", "turnover", "amivest_ratio", "amihud_illiq",
    "flow_ratio", "order_ratio",
)


@dataclass(frozen=True, slots=True)
class FeatureMask:
    """Validity flags, one per metric, field names matching METRIC_NAMES."""

    spread: bool
    effective_spread: bool
    rel_spread_mid: bool
    rel_spread_log: bool
    rel_effective_spread: bool
    depth: bool
    log_depth: bool
    dollar_depth: bool
    quote_slope: bool
    log_quote_slope: bool
    adj_log_quote_slope: bool
    composite_liquidity: bool
    turnover: bool
    amivest_ratio: bool
    amihud_illiq: bool
    flow_ratio: bool
    order_ratio: bool

    def as_tuple(self) -> tuple[bool, ...]:
        return tuple(getattr(self, name) for name in METRIC_NAMES)

    def all_valid(self, names: Iterable[str] = METRIC_NAMES) -> bool:
        return all(getattr(self, name) for name in names)


@dataclass(frozen=True, slots=True)
class FeatureVector:
    """Seventeen metrics plus their validity mask. Masked slots hold 0.0."""

    spread: float
    effective_spread: float
    rel_spread_mid: float
    rel_spread_log: float
    rel_effective_spread: float
    depth: float
    log_depth: float
    dollar_depth: float
    quote_slope: float
    log_quote_slope: float
    adj_log_quote_slope: float
    composite_liquidity: float
    turnover: float
    amivest_ratio: float
    amihud_illiq: float
    flow_ratio: float
    order_ratio: float
    valid_mask: FeatureMask

    def as_tuple(self, names: Sequence[str] = METRIC_NAMES) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in names)


assert tuple(f.name for f in fields(FeatureMask)) == METRIC_NAMES
assert tuple(f.name for f in fields(FeatureVector))[:-1] == METRIC_NAMES


# ---------------------------------------------------------------------------
# metric groups
# ---------------------------------------------------------------------------

def _finite_only(values: dict[str, float]) -> dict[str, float]:
    if all(map(math.isfinite, values.values())):
        return values
    return {k: v for k, v in values.items() if math.isfinite(v)}


def spread_metrics(b: MinuteBucket) -> dict[str, float]:
    """Absolute, effective, and the three relative spread measures."""
    mid = 0.5 * (b.avg_ask_price + b.avg_bid_price)
    spread = b.avg_ask_price - b.avg_bid_price
    effective = 2.0 * abs(b.first_trade_price - mid)
    return _finite_only({
        "spread": spread,
        "effective_spread": effective,
        "rel_spread_mid": spread / mid,
        "rel_spread_log": math.log(b.avg_ask_price / b.avg_bid_price),
        "rel_effective_spread": effective / b.first_trade_price,
    })


def depth_metrics(b: MinuteBucket) -> dict[str, float]:
    """Share depth, log depth, and dollar depth of the average book."""
    return _finite_only({
        "depth": 0.5 * (b.avg_ask_size + b.avg_bid_size),
        "log_depth": math.log(b.avg_ask_size) + math.log(b.avg_bid_size),
        "dollar_depth": 0.5 * (b.avg_ask_size * b.avg_ask_price
                               + b.avg_bid_size * b.avg_bid_price),
    })


def slope_metrics(b: MinuteBucket) -> dict[str, float]:
    """Quote-slope family and composite liquidity.

    The three slope metrics divide by log_depth and are masked when it is
    exactly zero (unit-by-unit book, Qa * Qb == 1).
    """
    d = depth_metrics(b)
    s = spread_metrics(b)
    out: dict[str, float] = {}
    dollar = d.get("dollar_depth")
    rel_mid = s.get("rel_spread_mid")
    if dollar is not None and rel_mid is not None:
        out["composite_liquidity"] = rel_mid / dollar
    log_depth = d.get("log_depth")
    rel_log = s.get("rel_spread_log")
    if log_depth is not None and log_depth != 0.0 and rel_log is not None:
        lqs = rel_log / log_depth
        out["quote_slope"] = s["spread"] / log_depth
        out["log_quote_slope"] = lqs
        out["adj_log_quote_slope"] = lqs * (
            1.0 + abs(math.log(b.avg_bid_size / b.avg_ask_size)))
    return _finite_only(out)


def activity_metrics(b: MinuteBucket,
                     prev: MinuteBucket | None) -> dict[str, float]:
    """Turnover and the return/time dependent ratios.

    With no previous bucket the Amivest ratio, the Amihud illiquidity, and
    the flow ratio are masked. With a zero log return only the Amivest ratio
    drops; the Amihud illiquidity is genuinely 0.
    """
    turnover = b.first_trade_price * b.first_trade_size
    out = {
        "turnover": turnover,
        "order_ratio": abs(b.avg_bid_size - b.avg_ask_size) / turnover,
    }
    if prev is not None:
        r = math.log(b.first_trade_price / prev.first_trade_price)
        out["amihud_illiq"] = abs(r) / turnover
        if r != 0.0:
            out["amivest_ratio"] = turnover / abs(r)
        gap_s = (b.first_trade_time - prev.first_trade_time) / 1e9
        if gap_s > 0.0:
            out["flow_ratio"] = turnover / gap_s
    return _finite_only(out)


def compute_feature_vector(b: MinuteBucket,
                           prev: MinuteBucket | None = None) -> FeatureVector:
    """Merge all metric groups into one fixed-width vector with its mask."""
    values: dict[str, float] = {}
    values.update(spread_metrics(b))
    values.update(depth_metrics(b))
    values.update(slope_metrics(b))
    values.update(activity_metrics(b, prev))
    mask = FeatureMask(**{name: name in values for name in METRIC_NAMES})
    return FeatureVector(**{name: values.get(name, 0.0) for name in METRIC_NAMES},
                         valid_mask=mask)


# ---------------------------------------------------------------------------
# feature dump CSV
# ---------------------------------------------------------------------------
# ticker,minute_start,<17 metric columns>,<17 valid_<metric> 0/1 columns>

FEATURE_COLUMNS = (("ticker", "minute_start")
                   + METRIC_NAMES
                   + tuple(f"valid_{name}" for name in METRIC_NAMES))
_FEATURE_HEADER = ",".join(FEATURE_COLUMNS)


def write_features_csv(rows: Iterable[tuple[MinuteBucket, FeatureVector]],
                       path: str | os.PathLike,
                       config_hash: str | None = None) -> None:
    lines = []
    if config_hash is not None:
        lines.append(f"# liqlab_config_hash={config_hash}")
    lines.append(_FEATURE_HEADER)
    for bucket, fv in rows:
        vals = ",".join(repr(v) for v in fv.as_tuple())
        flags = ",".join("1" if f else "0" for f in fv.valid_mask.as_tuple())
        lines.append(f"{bucket.ticker},{bucket.minute_start},{vals},{flags}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_features_csv(source) -> list[tuple[str, int, FeatureVector]]:
    """Read a feature dump as (ticker, minute_start, vector) triples."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return read_features_csv(fh)
    fh: IO[str] = source
    line = fh.readline()
    while line.startswith("#"):
        line = fh.readline()
    if line.rstrip("\r\n") != _FEATURE_HEADER:
        raise MalformedHeader(f"unrecognized feature header: {line.rstrip()!r}")
    n = len(METRIC_NAMES)
    out = []
    for raw in fh:
        p = raw.rstrip("\r\n").split(",")
        if len(p) != len(FEATURE_COLUMNS):
            raise DataError(f"feature row has {len(p)} fields: {raw.rstrip()!r}")
        values = {name: float(p[2 + i]) for i, name in enumerate(METRIC_NAMES)}
        mask = FeatureMask(**{name: p[2 + n + i] == "1"
                              for i, name in enumerate(METRIC_NAMES)})
        out.append((p[0], int(p[1]), FeatureVector(**values, valid_mask=mask)))
    return out
