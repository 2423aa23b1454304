"""Ingest behaviour: parsing, pruning to a fixed point, duplicate stats,
spamicity, collapsing and time normalization."""

import random
from datetime import date, timedelta

import pytest

from bcscan.ingest import (DuplicateStats, EmptyLog, ParseError, RawRating,
                           build_graph, collapse_duplicates, compute_spamicity,
                           ingest_ratings, normalize_time, parse_log, prune)
from bcscan.model import DetectionConfig


def rr(reviewer, product, value, iso):
    return RawRating(reviewer, product, float(value), date.fromisoformat(iso))


class TestParseLog:
    def test_csv_line(self):
        records, errors = parse_log(["u1,p1,5,2004-03-01"])
        assert errors == []
        assert records == [rr("u1", "p1", 5, "2004-03-01")]

    def test_jsonl_line(self):
        line = '{"reviewer": "u1", "product": "p1", "value": 4.5, "date": "2004-03-01"}'
        records, errors = parse_log([line], fmt="jsonl")
        assert errors == []
        assert records[0].value == 4.5

    def test_value_out_of_range(self):
        records, errors = parse_log(["u1,p1,9,2004-03-01"], max_value=5.0)
        assert records == []
        assert len(errors) == 1 and errors[0].line_no == 1
        assert "outside" in errors[0].reason

    def test_malformed_lines_collected_with_numbers(self):
        lines = ["u1,p1,5,2004-03-01",
                 "garbage",
                 "u2,p1,4,not-a-date",
                 "",
                 "u3,p1,3,2004-03-02"]
        records, errors = parse_log(lines)
        assert [r.reviewer for r in records] == ["u1", "u3"]
        assert [e.line_no for e in errors] == [2, 3]

    def test_strict_raises_first_error(self):
        with pytest.raises(ParseError) as exc:
            parse_log(["u1,p1,5,2004-03-01", "nope"], strict=True)
        assert exc.value.line_no == 2

    def test_quoted_csv_ids(self):
        records, _ = parse_log(['"last, first",p1,5,2004-03-01'])
        assert records[0].reviewer == "last, first"

    def test_unknown_format_rejected(self):
        with pytest.raises(ValueError):
            parse_log([], fmt="xml")


class TestPrune:
    def test_reviewer_below_threshold_removed(self):
        raw = [rr("thin", f"p{i}", 5, "2004-01-01") for i in range(9)]
        raw += [rr("busy", f"p{i}", 5, "2004-01-01") for i in range(10)]
        # make every product popular enough that only the reviewer rule bites
        raw += [rr(f"filler{k}", f"p{i}", 3, "2004-01-02")
                for i in range(10) for k in range(10)]
        kept = prune(raw, reviewer_min=10, product_min=10)
        reviewers = {r.reviewer for r in kept}
        assert "thin" not in reviewers
        assert "busy" in reviewers

    def test_product_below_threshold_removed(self):
        raw = []
        for r in range(12):
            for p in range(12):
                raw.append(rr(f"u{r:02d}", f"p{p:02d}", 4, "2004-01-01"))
        raw.append(rr("u00", "lonely", 4, "2004-01-01"))
        kept = prune(raw, reviewer_min=10, product_min=10)
        assert all(k.product != "lonely" for k in kept)
        assert len(kept) == 144

    def test_cascade_reaches_fixed_point(self):
        # u-core reviewers each rate 10 popular products; "extra" only stays
        # popular thanks to a reviewer who loses their footing once a thin
        # product disappears
        raw = []
        for r in range(10):
            for p in range(10):
                raw.append(rr(f"u{r}", f"p{p}", 4, "2004-01-01"))
        hanger = [rr("hang", f"p{p}", 4, "2004-01-02") for p in range(9)]
        hanger.append(rr("hang", "thin", 4, "2004-01-02"))
        kept = prune(raw + hanger, reviewer_min=10, product_min=10)
        # "thin" has 1 rating -> dies; "hang" then has 9 products -> dies too
        assert {k.reviewer for k in kept} == {f"u{r}" for r in range(10)}
        assert len(kept) == 100

    def test_zero_thresholds_keep_everything(self):
        raw = [rr("u1", "p1", 5, "2004-01-01")]
        assert prune(raw, 0, 0) == raw

    def test_idempotent(self):
        rng = random.Random(5)
        raw = [rr(f"u{rng.randrange(8)}", f"p{rng.randrange(8)}",
                  rng.randint(1, 5), "2004-01-01") for _ in range(120)]
        once = prune(raw, 3, 3)
        assert prune(once, 3, 3) == once


class TestSpamicity:
    def test_casual_pairs_score_zero(self):
        stats = DuplicateStats.from_ratings(
            [rr("u1", "p1", 5, "2004-01-01"), rr("u1", "p1", 4, "2004-01-02"),
             rr("u2", "p1", 3, "2004-01-01")])
        assert compute_spamicity(stats, "u1", "p1") == 0.0
        assert compute_spamicity(stats, "u2", "p1") == 0.0

    def test_heavy_pair_scores_its_share(self):
        raw = [rr("u1", "p1", 5, "2004-01-01")] * 5
        raw += [rr(f"u{k}", "p1", 3, "2004-01-01") for k in range(2, 17)]
        stats = DuplicateStats.from_ratings(raw)
        assert stats.product_counts["p1"] == 20
        assert compute_spamicity(stats, "u1", "p1") == 0.25

    def test_single_rating_zero(self):
        stats = DuplicateStats.from_ratings([rr("u1", "p1", 5, "2004-01-01")])
        assert compute_spamicity(stats, "u1", "p1") == 0.0


class TestNormalizeTime:
    def test_offsets_from_earliest(self):
        raw = [rr("u1", "p1", 5, "2004-01-31"), rr("u2", "p1", 4, "2004-01-01")]
        epoch, mapping = normalize_time(raw)
        assert epoch == date(2004, 1, 1)
        assert mapping[date(2004, 1, 1)] == 0
        assert mapping[date(2004, 1, 31)] == 30

    def test_single_rating_is_day_zero(self):
        epoch, mapping = normalize_time([rr("u1", "p1", 5, "2004-06-15")])
        assert mapping[epoch] == 0

    def test_empty_log_raises(self):
        with pytest.raises(EmptyLog):
            normalize_time([])


class TestCollapse:
    def test_last_posting_wins(self):
        raw = [rr("u1", "p1", 2, "2004-01-03"), rr("u1", "p1", 5, "2004-01-09"),
               rr("u1", "p1", 3, "2004-01-05"), rr("u2", "p1", 4, "2004-01-01")]
        edges = collapse_duplicates(raw, DuplicateStats.from_ratings(raw))
        by_pair = {(e.reviewer, e.product): e for e in edges}
        winner = by_pair[("u1", "p1")]
        assert winner.value == 5.0
        assert winner.time == 8  # days after 2004-01-01

    def test_same_day_tie_breaks_by_input_order(self):
        raw = [rr("u1", "p1", 2, "2004-01-05"), rr("u1", "p1", 4, "2004-01-05")]
        edges = collapse_duplicates(raw, DuplicateStats.from_ratings(raw))
        assert edges[0].value == 4.0

    def test_spamicity_attached_to_surviving_edge(self):
        raw = [rr("u1", "p1", 5, f"2004-01-0{d}") for d in range(1, 5)]
        raw += [rr(f"u{k}", "p1", 3, "2004-01-01") for k in range(2, 8)]
        stats = DuplicateStats.from_ratings(raw)
        edges = collapse_duplicates(raw, stats)
        by_pair = {(e.reviewer, e.product): e for e in edges}
        assert by_pair[("u1", "p1")].spamicity == pytest.approx(0.4)
        assert by_pair[("u2", "p1")].spamicity == 0.0

    def test_no_duplicates_is_identity_shaped(self):
        raw = [rr("u1", "p1", 5, "2004-01-01"), rr("u2", "p2", 3, "2004-01-04")]
        edges = collapse_duplicates(raw, DuplicateStats.from_ratings(raw))
        assert [(e.reviewer, e.product, e.value, e.time) for e in edges] == \
            [("u1", "p1", 5.0, 0), ("u2", "p2", 3.0, 3)]


def test_build_graph_sets_epoch_and_collapses():
    raw = [rr("u1", "p1", 5, "2004-02-01"), rr("u1", "p1", 3, "2004-02-10"),
           rr("u2", "p1", 4, "2004-02-05")]
    g = build_graph(raw)
    assert g.epoch == date(2004, 2, 1)
    assert len(g) == 2
    assert g.edge("u1", "p1").value == 3.0


def test_ingest_pipeline_applies_config():
    cfg = DetectionConfig(prune_reviewer_min=1, prune_product_min=2)
    raw = [rr("u1", "p1", 5, "2004-01-01"), rr("u2", "p1", 4, "2004-01-02"),
           rr("u3", "lone", 5, "2004-01-01")]
    g = ingest_ratings(raw, cfg)
    assert g.products == ("p1",)
    assert ingest_ratings([], cfg).reviewers == ()


def test_ingest_deterministic():
    rng = random.Random(11)
    raw = [rr(f"u{rng.randrange(20)}", f"p{rng.randrange(10)}", rng.randint(1, 5),
              (date(2004, 1, 1) + timedelta(days=rng.randrange(90))).isoformat())
           for _ in range(400)]
    cfg = DetectionConfig(prune_reviewer_min=2, prune_product_min=2)
    assert ingest_ratings(raw, cfg).snapshot() == ingest_ratings(list(raw), cfg).snapshot()
