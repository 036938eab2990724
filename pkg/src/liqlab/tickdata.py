"""Tick-level data model, tape parsing, and session filtering.

Tape format
-----------
A tape is a UTF-8 CSV with the exact header

    timestamp,ticker,kind,trade_price,trade_size,bid_price,ask_price,bid_size,ask_size

``timestamp`` is integer nanoseconds since the Unix epoch, ``ticker`` is
uppercase alphanumeric, ``kind`` is ``T`` (trade) or ``Q`` (quote). A trade
row fills ``trade_price,trade_size`` and leaves the four quote fields empty;
a quote row does the opposite. Fields never contain commas or quoting, which
lets the parser split lines directly.

A file may interleave tickers, but each ticker's records must be time-sorted.
Prices and sizes must be positive finite decimals; numeric validation goes
through :class:`decimal.Decimal` so that strings like ``nan``, ``1e999`` or
padded whitespace are rejected rather than silently coerced. Crossed quotes
(ask < bid) are rejected at ingest and counted separately from malformed
rows, so nothing downstream ever sees a crossed book.
"""

from __future__ import annotations

import datetime as dt
import enum
import io
import os
import re
from dataclasses import dataclass, field
from decimal import Decimal
from typing import IO, Iterable
from zoneinfo import ZoneInfo

from .errors import ConfigError, MalformedHeader, UnsortedInput

NS_PER_MINUTE = 60_000_000_000

TAPE_HEADER = ("timestamp,ticker,kind,trade_price,trade_size,"
               "bid_price,ask_price,bid_size,ask_size")
TAPE_COLUMNS = tuple(TAPE_HEADER.split(","))

_TICKER_RE = re.compile(r"[A-Z0-9]+\Z")


class Kind(enum.Enum):
    TRADE = "T"
    QUOTE = "Q"


@dataclass(frozen=True, slots=True)
class TickRecord:
    """One tape row. Fields not applicable to ``kind`` stay ``None``."""

    timestamp: int
    ticker: str
    kind: Kind
    trade_price: float | None = None
    trade_size: float | None = None
    bid_price: float | None = None
    ask_price: float | None = None
    bid_size: float | None = None
    ask_size: float | None = None


@dataclass(frozen=True)
class SessionWindow:
    """Half-open wall-clock window [start_time, end_time) in exchange time."""

    start_time: dt.time = dt.time(11, 0)
    end_time: dt.time = dt.time(16, 0)

    def __post_init__(self) -> None:
        if self.start_time >= self.end_time:
            raise ConfigError(
                f"session start {self.start_time} must precede end {self.end_time}")

    @property
    def start_ns(self) -> int:
        return _time_of_day_ns(self.start_time)

    @property
    def end_ns(self) -> int:
        return _time_of_day_ns(self.end_time)

    @property
    def minutes(self) -> int:
        """Whole minutes spanned by the window."""
        return (self.end_ns - self.start_ns) // NS_PER_MINUTE


@dataclass
class IngestReport:
    """Row accounting for one parse pass."""

    accepted: int = 0
    rejected_malformed: int = 0
    rejected_crossed: int = 0
    # first few (line number, reason) pairs kept for diagnostics
    errors: list[tuple[int, str]] = field(default_factory=list)

    _MAX_ERRORS = 20

    def note(self, line_no: int, reason: str) -> None:
        if len(self.errors) < self._MAX_ERRORS:
            self.errors.append((line_no, reason))


def _time_of_day_ns(t: dt.time) -> int:
    return ((t.hour * 3600 + t.minute * 60 + t.second) * 1_000_000_000
            + t.microsecond * 1000)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _positive_number(text: str) -> float:
    """Validate *text* as a positive finite decimal numeral, return as float."""
    if text != text.strip() or "_" in text:
        # Decimal() tolerates padding and underscores; the tape format does not
        raise ValueError(f"non-canonical numeral: {text!r}")
    value = Decimal(text)  # raises InvalidOperation on junk
    if not value.is_finite() or value <= 0:
        raise ValueError(f"not a positive finite number: {text!r}")
    result = float(value)
    if result == 0.0 or result == float("inf"):
        # underflowed or overflowed the float range (e.g. "1e999")
        raise ValueError(f"out of float range: {text!r}")
    return result


def _as_text_reader(source) -> tuple[IO[str], bool]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="utf-8", newline=""), True
    if isinstance(source, (io.RawIOBase, io.BufferedIOBase)):
        return io.TextIOWrapper(source, encoding="utf-8", newline=""), False
    return source, False


def parse_tape(source) -> tuple[list[TickRecord], IngestReport]:
    """Parse a tape from a path or an open text/binary stream.

    A wrong header raises :class:`MalformedHeader`; individual bad rows are
    counted in the report and skipped, never fatal. Returns the accepted
    records in file order together with the :class:`IngestReport`.
    """
    fh, should_close = _as_text_reader(source)
    try:
        header = fh.readline().rstrip("\r\n")
        if header != TAPE_HEADER:
            raise MalformedHeader(f"unrecognized tape header: {header!r}")

        records: list[TickRecord] = []
        append = records.append
        report = IngestReport()
        ticker_ok: dict[str, bool] = {}
        trade, quote = Kind.TRADE, Kind.QUOTE
        line_no = 1
        for line in fh:
            line_no += 1
            parts = line.rstrip("\r\n").split(",")
            try:
                if len(parts) != 9:
                    raise ValueError(f"expected 9 fields, got {len(parts)}")
                ts = int(parts[0])
                if ts <= 0:
                    raise ValueError("timestamp must be a positive integer")
                ticker = parts[1]
                ok = ticker_ok.get(ticker)
                if ok is None:
                    ok = _TICKER_RE.fullmatch(ticker) is not None
                    ticker_ok[ticker] = ok
                if not ok:
                    raise ValueError(f"invalid ticker {ticker!r}")
                kind = parts[2]
                if kind == "T":
                    if parts[5] or parts[6] or parts[7] or parts[8]:
                        raise ValueError("trade row carries quote fields")
                    rec = TickRecord(ts, ticker, trade,
                                     trade_price=_positive_number(parts[3]),
                                     trade_size=_positive_number(parts[4]))
                elif kind == "Q":
                    if parts[3] or parts[4]:
                        raise ValueError("quote row carries trade fields")
                    bid = _positive_number(parts[5])
                    ask = _positive_number(parts[6])
                    if ask < bid:
                        report.rejected_crossed += 1
                        report.note(line_no, f"crossed quote bid={bid} ask={ask}")
                        continue
                    rec = TickRecord(ts, ticker, quote,
                                     bid_price=bid, ask_price=ask,
                                     bid_size=_positive_number(parts[7]),
                                     ask_size=_positive_number(parts[8]))
                else:
                    raise ValueError(f"unknown record kind {kind!r}")
            except (ValueError, ArithmeticError) as exc:
                report.rejected_malformed += 1
                report.note(line_no, str(exc))
                continue
            append(rec)
        report.accepted = len(records)
        return records, report
    finally:
        if should_close:
            fh.close()


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def format_record(rec: TickRecord) -> str:
    """One tape line (no newline). Floats use repr, which round-trips."""
    if rec.kind is Kind.TRADE:
        return (f"{rec.timestamp},{rec.ticker},T,"
                f"{rec.trade_price!r},{rec.trade_size!r},,,,")
    return (f"{rec.timestamp},{rec.ticker},Q,,,"
            f"{rec.bid_price!r},{rec.ask_price!r},"
            f"{rec.bid_size!r},{rec.ask_size!r}")


def write_tape(records: Iterable[TickRecord], dest) -> None:
    """Write records as a tape CSV to a path or open text stream.

    ``parse_tape(write_tape(records))`` reproduces the records exactly: repr
    floats survive the Decimal validation round trip bit for bit.
    """
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            _write_tape_stream(records, fh)
    else:
        _write_tape_stream(records, dest)


def _write_tape_stream(records: Iterable[TickRecord], fh: IO[str]) -> None:
    fh.write(TAPE_HEADER + "\n")
    for rec in records:
        fh.write(format_record(rec) + "\n")


# ---------------------------------------------------------------------------
# session filtering
# ---------------------------------------------------------------------------

class MinuteClock:
    """Memoized wall-clock lookups for nanosecond timestamps.

    Exchange timezone offsets change only at whole-minute boundaries, so one
    zoneinfo conversion per distinct epoch minute serves every record inside
    that minute. This keeps session filtering cheap on large tapes.
    """

    def __init__(self, timezone: str | ZoneInfo):
        self.tz = ZoneInfo(timezone) if isinstance(timezone, str) else timezone
        self._tod: dict[int, int] = {}
        self._date: dict[int, dt.date] = {}

    def time_of_day_ns(self, ts: int) -> int:
        minute = ts // NS_PER_MINUTE
        base = self._tod.get(minute)
        if base is None:
            local = dt.datetime.fromtimestamp(minute * 60, self.tz)
            base = (local.hour * 3600 + local.minute * 60 + local.second) * 1_000_000_000
            self._tod[minute] = base
        return base + (ts - minute * NS_PER_MINUTE)

    def local_date(self, ts: int) -> dt.date:
        minute = ts // NS_PER_MINUTE
        day = self._date.get(minute)
        if day is None:
            day = dt.datetime.fromtimestamp(minute * 60, self.tz).date()
            self._date[minute] = day
        return day


def filter_session(records: Iterable[TickRecord],
                   window: SessionWindow,
                   timezone: str | ZoneInfo) -> list[TickRecord]:
    """Keep records whose wall-clock time falls in [start, end).

    The input stream must be time-sorted (non-decreasing); a violation raises
    :class:`UnsortedInput`. Filtering is idempotent and order-preserving.
    """
    clock = MinuteClock(timezone)
    tod = clock.time_of_day_ns
    start_ns, end_ns = window.start_ns, window.end_ns
    out: list[TickRecord] = []
    push = out.append
    last_ts = -1
    for rec in records:
        ts = rec.timestamp
        if ts < last_ts:
            raise UnsortedInput(
                f"timestamp {ts} after {last_ts} for ticker {rec.ticker}")
        last_ts = ts
        if start_ns <= tod(ts) < end_ns:
            push(rec)
    return out
