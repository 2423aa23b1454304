"""Rating-log ingestion: parse raw lines, prune thin activity, compute
duplicate statistics and collapse repeated opinions into graph edges."""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from datetime import date
from typing import Iterable, Mapping

from .model import BcscanError, DEFAULT_MAX_VALUE, DetectionConfig, RatingEdge, RatingGraph

log = logging.getLogger(__name__)


class ParseError(BcscanError):
    """A malformed log line, with its 1-based line number."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class EmptyLog(BcscanError):
    """Time normalization needs at least one rating."""


@dataclass(frozen=True)
class RawRating:
    """One log line before duplicate collapsing: a dated opinion."""

    reviewer: str
    product: str
    value: float
    date: date


def parse_log(lines: Iterable[str], fmt: str = "csv",
              max_value: float = DEFAULT_MAX_VALUE,
              strict: bool = False) -> tuple[list[RawRating], list[ParseError]]:
    """Parse a rating log into RawRating records.

    ``fmt`` is "csv" (reviewer,product,value,yyyy-mm-dd) or "jsonl" (objects
    with reviewer/product/value/date keys). Malformed lines are collected as
    ParseError values and skipped; under ``strict`` the first one is raised.
    Returns (records, errors).
    """
    if fmt not in ("csv", "jsonl"):
        raise ValueError(f"unknown log format {fmt!r}")
    records: list[RawRating] = []
    errors: list[ParseError] = []

    def fail(line_no: int, reason: str):
        err = ParseError(line_no, reason)
        if strict:
            raise err
        errors.append(err)

    for line_no, line in enumerate(lines, start=1):
        text = line.rstrip("\n")
        if not text.strip():
            continue
        try:
            if fmt == "csv":
                row = next(csv.reader([text]))
                if len(row) != 4:
                    raise ValueError(f"expected 4 fields, got {len(row)}")
                reviewer, product, value_s, date_s = (f.strip() for f in row)
            else:
                rec = json.loads(text)
                if not isinstance(rec, dict):
                    raise ValueError("expected a JSON object")
                missing = [k for k in ("reviewer", "product", "value", "date")
                           if k not in rec]
                if missing:
                    raise ValueError(f"missing keys: {', '.join(missing)}")
                reviewer, product = str(rec["reviewer"]), str(rec["product"])
                value_s, date_s = rec["value"], str(rec["date"])
            if not reviewer or not product:
                raise ValueError("empty reviewer or product id")
            value = float(value_s)
            if not 1.0 <= value <= max_value:
                raise ValueError(f"value {value!r} outside [1, {max_value}]")
            when = date.fromisoformat(date_s)
        except ParseError:
            raise
        except Exception as exc:
            fail(line_no, str(exc))
            continue
        records.append(RawRating(reviewer, product, value, when))
    if errors:
        log.warning("skipped %d malformed line(s) out of %d", len(errors), line_no)
    return records, errors


def prune(raw: list[RawRating], reviewer_min: int = 10,
          product_min: int = 10) -> list[RawRating]:
    """Drop thin activity until a joint fixed point.

    A reviewer survives with at least ``reviewer_min`` distinct rated
    products, a product with at least ``product_min`` raw ratings. Removing
    one side can starve the other, so the filter repeats until stable.
    Input order is preserved.
    """
    kept = list(raw)
    while True:
        products_by_reviewer: dict[str, set[str]] = defaultdict(set)
        ratings_per_product: Counter[str] = Counter()
        for rr in kept:
            products_by_reviewer[rr.reviewer].add(rr.product)
            ratings_per_product[rr.product] += 1
        survivors = [rr for rr in kept
                     if len(products_by_reviewer[rr.reviewer]) >= reviewer_min
                     and ratings_per_product[rr.product] >= product_min]
        if len(survivors) == len(kept):
            return survivors
        kept = survivors


@dataclass(frozen=True)
class DuplicateStats:
    """Multiplicity counts over a raw (pre-collapse) rating list."""

    pair_counts: Mapping[tuple[str, str], int]
    product_counts: Mapping[str, int]

    @classmethod
    def from_ratings(cls, raw: Iterable[RawRating]) -> "DuplicateStats":
        pairs: Counter[tuple[str, str]] = Counter()
        products: Counter[str] = Counter()
        for rr in raw:
            pairs[(rr.reviewer, rr.product)] += 1
            products[rr.product] += 1
        return cls(dict(pairs), dict(products))


def compute_spamicity(stats: DuplicateStats, reviewer: str, product: str) -> float:
    """Share of the product's raw ratings posted by this pair.

    Posting once or twice is treated as ordinary behaviour and scores 0.
    """
    pair = stats.pair_counts.get((reviewer, product), 0)
    if pair <= 2:
        return 0.0
    return pair / stats.product_counts[product]


def normalize_time(raw: list[RawRating]) -> tuple[date, dict[date, int]]:
    """Map calendar dates to day offsets from the earliest rating."""
    if not raw:
        raise EmptyLog("cannot normalize an empty rating list")
    epoch = min(rr.date for rr in raw)
    mapping = {d: (d - epoch).days for d in {rr.date for rr in raw}}
    return epoch, mapping


def collapse_duplicates(raw: list[RawRating],
                        stats: DuplicateStats) -> list[RatingEdge]:
    """Collapse repeated opinions into one edge per (reviewer, product).

    The chronologically last posting wins (ties broken by input order, so a
    later line beats an earlier one on the same day). Edge times are day
    offsets from the epoch of ``raw`` and each edge carries the pair's
    spamicity from ``stats``.
    """
    if not raw:
        return []
    _, day_of = normalize_time(raw)
    last: dict[tuple[str, str], RawRating] = {}
    for rr in raw:
        key = (rr.reviewer, rr.product)
        prev = last.get(key)
        if prev is None or rr.date >= prev.date:
            last[key] = rr
    edges = []
    for reviewer, product in sorted(last):
        rr = last[(reviewer, product)]
        edges.append(RatingEdge(reviewer, product, rr.value, day_of[rr.date],
                                compute_spamicity(stats, reviewer, product)))
    return edges


def build_graph(raw: list[RawRating],
                max_value: float = DEFAULT_MAX_VALUE) -> RatingGraph:
    """Collapse an already-pruned rating list into a RatingGraph."""
    if not raw:
        return RatingGraph([], max_value=max_value)
    epoch = min(rr.date for rr in raw)
    stats = DuplicateStats.from_ratings(raw)
    return RatingGraph(collapse_duplicates(raw, stats),
                       max_value=max_value, epoch=epoch)


def ingest_ratings(raw: list[RawRating], config: DetectionConfig) -> RatingGraph:
    """Full ingest pipeline: prune thin activity, then collapse into a graph."""
    pruned = prune(raw, config.prune_reviewer_min, config.prune_product_min)
    if len(pruned) != len(raw):
        log.info("pruning kept %d of %d ratings", len(pruned), len(raw))
    return build_graph(pruned, max_value=config.max_value)
