"""Tape parsing, serialization round trips, and session filtering."""

from __future__ import annotations

import datetime as dt
import io
from zoneinfo import ZoneInfo

import pytest
from hypothesis import given, strategies as st

from liqlab.errors import MalformedHeader, UnsortedInput
from liqlab.tickdata import (IngestReport, Kind, SessionWindow, TAPE_HEADER,
                             TickRecord, filter_session, parse_tape,
                             write_tape)

NY = "America/New_York"


def ny_ts(year, month, day, hour, minute, second=0, micro=0) -> int:
    local = dt.datetime(year, month, day, hour, minute, second, micro,
                        tzinfo=ZoneInfo(NY))
    return int(local.timestamp()) * 1_000_000_000 + micro * 1000


def parse_text(text: str):
    return parse_tape(io.StringIO(text))


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def test_parse_trade_row():
    records, report = parse_text(
        TAPE_HEADER + "\n1722855600000000000,IBM,T,185.30,200,,,,\n")
    assert report.accepted == 1
    assert report.rejected_malformed == 0
    (rec,) = records
    assert rec.timestamp == 1722855600000000000
    assert rec.ticker == "IBM"
    assert rec.kind is Kind.TRADE
    assert rec.trade_price == 185.30
    assert rec.trade_size == 200.0
    assert rec.bid_price is None and rec.ask_price is None


def test_parse_quote_row():
    records, _ = parse_text(
        TAPE_HEADER + "\n1722855600000000000,IBM,Q,,,185.28,185.31,300,450\n")
    (rec,) = records
    assert rec.kind is Kind.QUOTE
    assert rec.bid_price == 185.28
    assert rec.ask_price == 185.31
    assert rec.bid_size == 300.0
    assert rec.ask_size == 450.0
    assert rec.trade_price is None


def test_crossed_quote_rejected_and_counted():
    records, report = parse_text(
        TAPE_HEADER + "\n"
        "1,IBM,Q,,,185.40,185.30,100,100\n"
        "2,IBM,Q,,,185.30,185.30,100,100\n")  # locked book is fine
    assert report.rejected_crossed == 1
    assert report.rejected_malformed == 0
    assert len(records) == 1
    assert records[0].timestamp == 2


@pytest.mark.parametrize("row", [
    "x,IBM,T,185.30,200,,,,",              # bad timestamp
    "-5,IBM,T,185.30,200,,,,",             # non-positive timestamp
    "1,ibm,T,185.30,200,,,,",              # lowercase ticker
    "1,I_BM,T,185.30,200,,,,",             # bad ticker char
    "1,IBM,X,185.30,200,,,,",              # unknown kind
    "1,IBM,T,185.30,200,,,",               # eight fields
    "1,IBM,T,185.30,200,1,,,",             # trade with quote field
    "1,IBM,Q,185.30,,185.28,185.31,1,1",   # quote with trade field
    "1,IBM,T,nan,200,,,,",                 # nan price
    "1,IBM,T,inf,200,,,,",                 # inf price
    "1,IBM,T,-185.30,200,,,,",             # negative price
    "1,IBM,T,0,200,,,,",                   # zero price
    "1,IBM,T,185.30,0,,,,",                # zero size
    "1,IBM,T, 185.30,200,,,,",             # padded number
    "1,IBM,T,185.30,,,,,",                 # missing size
])
def test_malformed_rows_counted_not_fatal(row):
    records, report = parse_text(TAPE_HEADER + "\n" + row + "\n")
    assert records == []
    assert report.rejected_malformed == 1
    assert report.errors, "diagnostic note expected"


def test_malformed_rows_do_not_stop_later_rows():
    records, report = parse_text(
        TAPE_HEADER + "\n"
        "1,IBM,T,185.30,200,,,,\n"
        "garbage\n"
        "3,IBM,T,185.40,100,,,,\n")
    assert [r.timestamp for r in records] == [1, 3]
    assert report.accepted == 2
    assert report.rejected_malformed == 1


def test_bad_header_is_fatal():
    with pytest.raises(MalformedHeader):
        parse_text("time,tic,kind\n1,IBM,T\n")
    with pytest.raises(MalformedHeader):
        parse_text("")


def test_float_range_boundaries():
    # 1e999 is a finite Decimal but overflows float; it must be rejected,
    # while the largest representable magnitude still parses
    records, report = parse_text(TAPE_HEADER + "\n1,IBM,T,1e999,200,,,,\n")
    assert records == [] and report.rejected_malformed == 1

    records, report = parse_text(TAPE_HEADER + "\n1,IBM,T,1e-999,200,,,,\n")
    assert records == [] and report.rejected_malformed == 1

    records, _ = parse_text(TAPE_HEADER + "\n1,IBM,T,1e308,200,,,,\n")
    assert records[0].trade_price == 1e308


# ---------------------------------------------------------------------------
# round trip
# ---------------------------------------------------------------------------

def test_write_then_parse_identity_small():
    records = [
        TickRecord(1, "IBM", Kind.TRADE, trade_price=185.3, trade_size=200.0),
        TickRecord(2, "IBM", Kind.QUOTE, bid_price=185.28, ask_price=185.31,
                   bid_size=300.0, ask_size=450.0),
    ]
    buf = io.StringIO()
    write_tape(records, buf)
    buf.seek(0)
    parsed, report = parse_tape(buf)
    assert parsed == records
    assert report.rejected_malformed == 0 and report.rejected_crossed == 0


_price = st.floats(min_value=1e-6, max_value=1e9, allow_nan=False,
                   allow_infinity=False, exclude_min=True)
_size = st.floats(min_value=1e-3, max_value=1e9, allow_nan=False,
                  allow_infinity=False)
_ticker = st.from_regex(r"[A-Z0-9]{1,6}", fullmatch=True)


@st.composite
def tick_records(draw):
    ts = draw(st.integers(min_value=1, max_value=2**62))
    ticker = draw(_ticker)
    if draw(st.booleans()):
        return TickRecord(ts, ticker, Kind.TRADE,
                          trade_price=draw(_price), trade_size=draw(_size))
    bid = draw(_price)
    ask = bid + draw(st.floats(min_value=0, max_value=1e6, allow_nan=False))
    return TickRecord(ts, ticker, Kind.QUOTE, bid_price=bid, ask_price=ask,
                      bid_size=draw(_size), ask_size=draw(_size))


@given(st.lists(tick_records(), max_size=40))
def test_round_trip_property(records):
    buf = io.StringIO()
    write_tape(records, buf)
    buf.seek(0)
    parsed, report = parse_tape(buf)
    assert parsed == records
    assert report.accepted == len(records)
    assert report.rejected_malformed == 0
    assert report.rejected_crossed == 0


# ---------------------------------------------------------------------------
# session filter
# ---------------------------------------------------------------------------

def trade_at(ts: int, ticker="IBM") -> TickRecord:
    return TickRecord(ts, ticker, Kind.TRADE, trade_price=10.0, trade_size=1.0)


def test_filter_boundaries_half_open():
    window = SessionWindow()
    just_before = trade_at(ny_ts(2024, 8, 5, 11, 0) - 1_000_000)  # 10:59:59.999
    at_open = trade_at(ny_ts(2024, 8, 5, 11, 0))
    before_close = trade_at(ny_ts(2024, 8, 5, 16, 0) - 1)
    at_close = trade_at(ny_ts(2024, 8, 5, 16, 0))
    kept = filter_session([just_before, at_open, before_close, at_close],
                          window, NY)
    assert kept == [at_open, before_close]


def test_filter_full_day_survivor_count():
    # records every second from 09:30:00 through 16:00:00; the 11:00-16:00
    # half-open window keeps exactly 5 * 3600 of them
    start = ny_ts(2024, 8, 5, 9, 30)
    end = ny_ts(2024, 8, 5, 16, 0)
    records = [trade_at(ts) for ts in
               range(start, end + 1_000_000_000, 1_000_000_000)]
    kept = filter_session(records, SessionWindow(), NY)
    assert len(kept) == 18_000


def test_filter_idempotent_and_order_preserving():
    records = [trade_at(ny_ts(2024, 8, 5, 11, 0) + i * 7_000_000_000)
               for i in range(100)]
    once = filter_session(records, SessionWindow(), NY)
    twice = filter_session(once, SessionWindow(), NY)
    assert once == twice == records


def test_filter_unsorted_raises():
    records = [trade_at(ny_ts(2024, 8, 5, 12, 0)),
               trade_at(ny_ts(2024, 8, 5, 11, 59))]
    with pytest.raises(UnsortedInput):
        filter_session(records, SessionWindow(), NY)


def test_filter_respects_timezone():
    ts = ny_ts(2024, 8, 5, 12, 0)  # noon in New York, 9am in Los Angeles
    assert filter_session([trade_at(ts)], SessionWindow(), NY)
    assert not filter_session([trade_at(ts)], SessionWindow(),
                              "America/Los_Angeles")


def test_session_window_validation():
    from liqlab.errors import ConfigError

    with pytest.raises(ConfigError):
        SessionWindow(dt.time(16, 0), dt.time(11, 0))
    assert SessionWindow().minutes == 300


def test_ingest_report_error_cap():
    report = IngestReport()
    for i in range(100):
        report.note(i, "x")
    assert len(report.errors) == 20
