"""End-to-end stage plumbing shared by the command line tool.

The unit of work is a ticker-day: tapes are partitioned by ticker (file
order within a ticker is preserved), session-filtered, split on the local
calendar date, and reduced shard by shard. Shards are always processed and
reassembled in sorted (ticker, date) order, so the emitted artifacts are
byte-identical no matter how many worker processes run the map step.
"""

from __future__ import annotations

import datetime as dt
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .dataset import LabeledRow, LabelReport, assemble_rows, label_rows
from .errors import InputError
from .liquidity import FeatureVector, compute_feature_vector
from .sampler import MinuteBucket, bucketize
from .synth import group_ticker_days
from .tickdata import (IngestReport, SessionWindow, TickRecord, filter_session,
                       parse_tape)

ShardKey = tuple[str, dt.date]


def ingest(path: str | os.PathLike) -> tuple[list[TickRecord], IngestReport]:
    if not os.path.exists(path):
        raise InputError(f"input tape not found: {path}")
    return parse_tape(path)


def session_shards(records: list[TickRecord], window: SessionWindow,
                   timezone: str) -> list[tuple[ShardKey, list[TickRecord]]]:
    """Filter to the session window and split into sorted ticker-day shards."""
    by_ticker: dict[str, list[TickRecord]] = {}
    for rec in records:
        by_ticker.setdefault(rec.ticker, []).append(rec)
    kept: list[TickRecord] = []
    for ticker in sorted(by_ticker):
        kept.extend(filter_session(by_ticker[ticker], window, timezone))
    return group_ticker_days(kept, timezone)


def _bucketize_shard(item: tuple[ShardKey, list[TickRecord]]
                     ) -> tuple[ShardKey, list[MinuteBucket]]:
    key, records = item
    return key, bucketize(records)


def bucketize_shards(shards: list[tuple[ShardKey, list[TickRecord]]],
                     jobs: int = 1) -> list[tuple[ShardKey, list[MinuteBucket]]]:
    """Map bucketize over shards, in order, optionally in worker processes."""
    if jobs <= 1 or len(shards) <= 1:
        return [_bucketize_shard(item) for item in shards]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_bucketize_shard, shards))


def shard_features(buckets: list[MinuteBucket]
                   ) -> list[tuple[MinuteBucket, FeatureVector]]:
    out = []
    prev = None
    for b in buckets:
        out.append((b, compute_feature_vector(b, prev)))
        prev = b
    return out


@dataclass
class FeatureStage:
    """Everything the feature command produces, before serialization."""

    ingest_report: IngestReport
    buckets: list[MinuteBucket]
    features: list[tuple[MinuteBucket, FeatureVector]]
    shard_keys: list[ShardKey]


def run_feature_stage(tape_path: str | os.PathLike, window: SessionWindow,
                      timezone: str, jobs: int = 1) -> FeatureStage:
    records, report = ingest(tape_path)
    shards = session_shards(records, window, timezone)
    del records
    bucketed = bucketize_shards(shards, jobs=jobs)
    buckets: list[MinuteBucket] = []
    features: list[tuple[MinuteBucket, FeatureVector]] = []
    for _, shard_buckets in bucketed:
        buckets.extend(shard_buckets)
        features.extend(shard_features(shard_buckets))
    return FeatureStage(report, buckets, features,
                        [key for key, _ in bucketed])


def day_groups_from_buckets(buckets: list[MinuteBucket], timezone: str
                            ) -> list[tuple[ShardKey, list[MinuteBucket]]]:
    """Group a flat bucket list back into sorted ticker-day runs."""
    from .tickdata import MinuteClock

    clock = MinuteClock(timezone)
    groups: dict[ShardKey, list[MinuteBucket]] = {}
    for b in buckets:
        key = (b.ticker, clock.local_date(b.minute_start))
        groups.setdefault(key, []).append(b)
    return sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1]))


def rows_from_buckets(buckets: list[MinuteBucket], timezone: str,
                      active_features=None) -> tuple[list[LabeledRow], LabelReport]:
    """Label every ticker-day and assemble the ordered row list."""
    from .liquidity import METRIC_NAMES

    active = METRIC_NAMES if active_features is None else active_features
    total = LabelReport()
    per_day = []
    for _, day_buckets in day_groups_from_buckets(buckets, timezone):
        rows, rep = label_rows(day_buckets, active)
        per_day.append(rows)
        total.merge(rep)
    return assemble_rows(per_day), total
