"""Minute bucketing of tick streams.

A bucket summarizes one epoch minute of a single ticker-day: the first trade
of the minute (price, size, and exact time) plus event-weighted arithmetic
means of the quote fields over every quote in the minute. Minutes missing
either a trade or a quote are skipped entirely; no imputation, no carrying
forward. A 5-hour session can therefore yield at most 300 buckets.

Bucket dump CSV
---------------
    ticker,minute_start,first_trade_price,first_trade_size,avg_bid_price,
    avg_ask_price,avg_bid_size,avg_ask_size,quote_count,trade_count,
    first_trade_time

``minute_start`` and ``first_trade_time`` are integer nanoseconds since the
epoch. ``first_trade_time`` rides along so time-gap features can be rebuilt
from a dump without returning to the raw tape. Files may start with ``#``
comment lines (used to embed the run's config hash); readers skip them.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from typing import IO, Iterable

from .errors import DataError, MalformedHeader
from .tickdata import Kind, TickRecord, NS_PER_MINUTE
from .util import atomic_write_text

BUCKET_COLUMNS = (
    "ticker", "minute_start", "first_trade_price", "first_trade_size",
    "avg_bid_price", "avg_ask_price", "avg_bid_size", "avg_ask_size",
    "quote_count", "trade_count", "first_trade_time",
)
_BUCKET_HEADER = ",".join(BUCKET_COLUMNS)


@dataclass(frozen=True, slots=True)
class MinuteBucket:
    ticker: str
    minute_start: int           # ns, inclusive start of the minute
    first_trade_price: float
    first_trade_size: float
    first_trade_time: int       # ns timestamp of the first trade
    avg_bid_price: float
    avg_ask_price: float
    avg_bid_size: float
    avg_ask_size: float
    quote_count: int
    trade_count: int


def bucketize(records: Iterable[TickRecord]) -> list[MinuteBucket]:
    """Reduce one time-sorted single-ticker stream to minute buckets.

    The first trade of a minute is the earliest one (file order breaks exact
    timestamp ties, which the sequential scan gives for free). Quote averages
    are plain arithmetic means over the minute's quote events. Emitted
    buckets always satisfy avg_ask_price >= avg_bid_price because ingest
    rejects crossed quotes; the reduction asserts it.
    """
    buckets: list[MinuteBucket] = []
    ticker: str | None = None
    cur_minute = -1
    trade_count = quote_count = 0
    first_price = first_size = 0.0
    first_time = 0
    sum_bid = sum_ask = sum_bsz = sum_asz = 0.0

    def flush() -> None:
        if trade_count >= 1 and quote_count >= 1:
            avg_bid = sum_bid / quote_count
            avg_ask = sum_ask / quote_count
            assert avg_ask >= avg_bid, "crossed averages from uncrossed quotes"
            buckets.append(MinuteBucket(
                ticker, cur_minute * NS_PER_MINUTE,
                first_price, first_size, first_time,
                avg_bid, avg_ask,
                sum_bsz / quote_count, sum_asz / quote_count,
                quote_count, trade_count))

    for rec in records:
        if ticker is None:
            ticker = rec.ticker
        elif rec.ticker != ticker:
            raise DataError(
                f"bucketize expects a single ticker, saw {ticker!r} and {rec.ticker!r}")
        minute = rec.timestamp // NS_PER_MINUTE
        if minute != cur_minute:
            flush()
            cur_minute = minute
            trade_count = quote_count = 0
            sum_bid = sum_ask = sum_bsz = sum_asz = 0.0
        if rec.kind is Kind.TRADE:
            trade_count += 1
            if trade_count == 1:
                first_price = rec.trade_price
                first_size = rec.trade_size
                first_time = rec.timestamp
        else:
            quote_count += 1
            sum_bid += rec.bid_price
            sum_ask += rec.ask_price
            sum_bsz += rec.bid_size
            sum_asz += rec.ask_size
    flush()
    return buckets


# ---------------------------------------------------------------------------
# bucket dump CSV
# ---------------------------------------------------------------------------

def bucket_csv_line(b: MinuteBucket) -> str:
    return (f"{b.ticker},{b.minute_start},{b.first_trade_price!r},"
            f"{b.first_trade_size!r},{b.avg_bid_price!r},{b.avg_ask_price!r},"
            f"{b.avg_bid_size!r},{b.avg_ask_size!r},{b.quote_count},"
            f"{b.trade_count},{b.first_trade_time}")


def write_buckets_csv(buckets: Iterable[MinuteBucket],
                      path: str | os.PathLike,
                      config_hash: str | None = None) -> None:
    lines = []
    if config_hash is not None:
        lines.append(f"# liqlab_config_hash={config_hash}")
    lines.append(_BUCKET_HEADER)
    lines.extend(bucket_csv_line(b) for b in buckets)
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_buckets_csv(source) -> list[MinuteBucket]:
    """Read a bucket dump, skipping leading ``#`` comment lines."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return read_buckets_csv(fh)
    fh: IO[str] = source
    line = fh.readline()
    while line.startswith("#"):
        line = fh.readline()
    if line.rstrip("\r\n") != _BUCKET_HEADER:
        raise MalformedHeader(f"unrecognized bucket header: {line.rstrip()!r}")
    buckets = []
    for raw in fh:
        p = raw.rstrip("\r\n").split(",")
        if len(p) != len(BUCKET_COLUMNS):
            raise DataError(f"bucket row has {len(p)} fields: {raw.rstrip()!r}")
        buckets.append(MinuteBucket(
            p[0], int(p[1]), float(p[2]), float(p[3]), int(p[10]),
            float(p[4]), float(p[5]), float(p[6]), float(p[7]),
            int(p[8]), int(p[9])))
    return buckets
