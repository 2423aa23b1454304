"""Collusion detection: score mined groups, flag the collusive ones and
expand damaging-but-undecided groups into their tighter sub-groups."""

from __future__ import annotations

import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import fsum
from typing import Iterable, Mapping, NamedTuple, Sequence

from .model import (Biclique, DetectionConfig, IndicatorReport, RatingGraph,
                    validate_weights)
from .indicators import (SuspiciousnessTable, build_suspiciousness,
                         group_member_suspiciousness, group_rating_spamicity,
                         group_time_similarity, group_value_similarity)
from .mining import collusive_fragment_screen, enumerate_candidates, find_sub_bicliques

log = logging.getLogger(__name__)


def degree_of_collusiveness(gvs: float, gts: float, grs: float, gms: float,
                            weights: Iterable[float] = (0.25, 0.25, 0.25, 0.25),
                            ) -> float:
    """DOC: weighted sum of the four behavioural indicators.

    Weights must be four non-negative reals summing to 1 (BadWeights
    otherwise), which keeps the result in [0, 1].
    """
    ws = validate_weights(weights)
    value = fsum(v * w for v, w in zip((gvs, gts, grs, gms), ws))
    return min(1.0, max(0.0, value))


def damaging_impact(gps: float, gs: float) -> float:
    """DI: how much damage the group can do, the mean of its two size scores."""
    return (gps + gs) / 2.0


@dataclass(frozen=True)
class DetectionResult:
    """Outcome of a detection run.

    ``collusive`` holds the flagged groups sorted by descending DOC;
    ``scored`` holds every group that was examined (initial candidates plus
    expanded sub-groups) in canonical order, which is what reports and
    queries work from.
    """

    collusive: tuple[tuple[Biclique, IndicatorReport], ...]
    scored: tuple[tuple[Biclique, IndicatorReport], ...]
    examined_count: int
    expanded_count: int
    config: DetectionConfig

    def to_dict(self) -> dict:
        def rows(pairs):
            return [{**b.to_dict(), **rep.to_dict()} for b, rep in pairs]
        return {"config": self.config.to_dict(),
                "examined_count": self.examined_count,
                "expanded_count": self.expanded_count,
                "collusive": rows(self.collusive),
                "scored": rows(self.scored)}

    @classmethod
    def from_dict(cls, data: Mapping, graph: RatingGraph) -> "DetectionResult":
        config = DetectionConfig.from_dict(data["config"])

        def pairs(rows):
            out = []
            for row in rows:
                b = Biclique.from_graph(row["reviewers"], row["products"], graph)
                rep = IndicatorReport(row["gvs"], row["gts"], row["grs"],
                                      row["gms"], row["gs"], row["gps"],
                                      row["doc"], row["di"])
                out.append((b, rep))
            return tuple(out)

        return cls(pairs(data["collusive"]), pairs(data["scored"]),
                   int(data["examined_count"]), int(data["expanded_count"]),
                   config)


class _Quadruple(NamedTuple):
    gvs: float
    gts: float
    grs: float
    gms: float


def _quadruple(group: Biclique, table: SuspiciousnessTable,
               config: DetectionConfig) -> _Quadruple:
    return _Quadruple(group_value_similarity(group),
                      group_time_similarity(group, config.max_tw),
                      group_rating_spamicity(group),
                      group_member_suspiciousness(group, table))


def _map_quadruples(groups: Sequence[Biclique], table: SuspiciousnessTable,
                    config: DetectionConfig, threads: int) -> list[_Quadruple]:
    if threads <= 1 or len(groups) < 2:
        return [_quadruple(g, table, config) for g in groups]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda g: _quadruple(g, table, config), groups))


def score_cohort(graph: RatingGraph, groups: Sequence[Biclique],
                 config: DetectionConfig, table: SuspiciousnessTable | None = None,
                 threads: int = 1) -> list[tuple[Biclique, IndicatorReport]]:
    """Score a fixed cohort of groups against each other.

    Size scores are relative to the largest group present. Returned in
    canonical order.
    """
    if not groups:
        return []
    if table is None:
        table = build_suspiciousness(graph)
    ordered = sorted(groups, key=lambda b: b.key)
    quads = _map_quadruples(ordered, table, config, threads)
    max_r = max(len(b.reviewers) for b in ordered)
    max_p = max(len(b.products) for b in ordered)
    out = []
    for b, q in zip(ordered, quads):
        gs = len(b.reviewers) / max_r
        gps = len(b.products) / max_p
        rep = IndicatorReport(q.gvs, q.gts, q.grs, q.gms, gs, gps,
                              degree_of_collusiveness(*q, config.weights),
                              damaging_impact(gps, gs))
        out.append((b, rep))
    return out


def detect(graph: RatingGraph, config: DetectionConfig | None = None,
           threads: int = 1) -> DetectionResult:
    """Run the full detection pass over a graph.

    Mines maximal candidate groups, scores each one, and routes it: DOC
    above delta means collusive; otherwise a damaging impact below delta
    discards it, and anything still standing is expanded into sub-groups
    that re-enter the queue exactly once each. Size scores are always
    relative to the largest group ever enqueued.
    """
    if config is None:
        config = DetectionConfig(max_value=graph.max_value)
    candidates = enumerate_candidates(graph, config.min_r, config.min_p,
                                      config.candidate_cap)
    initial = list(candidates)
    if not initial:
        return DetectionResult((), (), 0, 0, config)
    table = build_suspiciousness(graph)
    screen = collusive_fragment_screen(config)

    quads: dict = {}
    for b, q in zip(initial, _map_quadruples(initial, table, config, threads)):
        quads[b.key] = q
    # sub-groups never exceed their parents, so these maxima are stable,
    # but keep them updated to match the "all groups ever enqueued" contract
    max_r = max(len(b.reviewers) for b in initial)
    max_p = max(len(b.products) for b in initial)

    queue = deque(initial)
    seen = {b.key for b in initial}
    examined: dict = {}
    collusive_keys: list = []
    expanded = 0
    while queue:
        group = queue.popleft()
        examined[group.key] = group
        q = quads[group.key]
        doc = degree_of_collusiveness(*q, config.weights)
        di = damaging_impact(len(group.products) / max_p,
                             len(group.reviewers) / max_r)
        if doc > config.delta:
            collusive_keys.append(group.key)
        elif di < config.delta:
            continue
        else:
            expanded += 1
            subs = find_sub_bicliques(group, graph, config, screen)
            fresh = [s for s in subs if s.key not in seen]
            for s, sq in zip(fresh, _map_quadruples(fresh, table, config, threads)):
                quads[s.key] = sq
                seen.add(s.key)
                queue.append(s)
                max_r = max(max_r, len(s.reviewers))
                max_p = max(max_p, len(s.products))
            if fresh:
                log.debug("expanded %r into %d sub-group(s)", group.key, len(fresh))

    def report_for(key) -> IndicatorReport:
        b = examined[key]
        q = quads[key]
        gs = len(b.reviewers) / max_r
        gps = len(b.products) / max_p
        return IndicatorReport(q.gvs, q.gts, q.grs, q.gms, gs, gps,
                               degree_of_collusiveness(*q, config.weights),
                               damaging_impact(gps, gs))

    scored = tuple((examined[k], report_for(k)) for k in sorted(examined))
    collusive = tuple(sorted(((examined[k], report_for(k)) for k in collusive_keys),
                             key=lambda br: (-br[1].doc, br[0].key)))
    return DetectionResult(collusive, scored, len(examined), expanded, config)


class ReportRow(NamedTuple):
    group_id: int
    reviewers: tuple[str, ...]
    products: tuple[str, ...]
    doc: float
    di: float
    status: str


def rank_report(result: DetectionResult) -> list[ReportRow]:
    """Flatten a detection result into display rows.

    Groups are numbered in canonical order. Status is "collusive" above the
    DOC threshold, "dangerous" when only the damaging impact clears delta,
    and "clear" otherwise: a low-DOC group with a big footprint still
    deserves an analyst's eye.
    """
    delta = result.config.delta
    rows = []
    for i, (b, rep) in enumerate(result.scored, start=1):
        if rep.doc > delta:
            status = "collusive"
        elif rep.di > delta:
            status = "dangerous"
        else:
            status = "clear"
        rows.append(ReportRow(i, b.reviewers, b.products, rep.doc, rep.di, status))
    return rows
