"""Core domain types: rating edges, the bipartite rating graph, bicliques,
per-group indicator reports and the detection configuration."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date
from math import fsum, isfinite
from typing import Iterable, Iterator, Mapping

DEFAULT_MAX_VALUE = 5.0
WEIGHT_TOLERANCE = 1e-9


class BcscanError(Exception):
    """Base class for every error this package raises on purpose."""


class DuplicateEdge(BcscanError):
    """A (reviewer, product) pair appeared twice while building a graph.

    Duplicate opinions must be collapsed during ingest; the graph itself
    never accepts them.
    """

    def __init__(self, reviewer: str, product: str):
        super().__init__(f"duplicate edge for ({reviewer!r}, {product!r})")
        self.reviewer = reviewer
        self.product = product


class MissingEdge(BcscanError):
    """A requested group is not a complete rectangle in the graph."""

    def __init__(self, reviewer: str, product: str):
        super().__init__(f"no rating by {reviewer!r} on {product!r}")
        self.reviewer = reviewer
        self.product = product


class BadWeights(BcscanError):
    """Indicator weights must be four non-negative reals summing to 1."""


def validate_weights(weights: Iterable[float]) -> tuple[float, float, float, float]:
    """Check a weight vector and return it as a 4-tuple of floats."""
    ws = tuple(float(w) for w in weights)
    if len(ws) != 4:
        raise BadWeights(f"expected 4 weights, got {len(ws)}")
    if any(not isfinite(w) or w < 0.0 for w in ws):
        raise BadWeights(f"weights must be non-negative reals: {ws}")
    total = fsum(ws)
    if abs(total - 1.0) > WEIGHT_TOLERANCE:
        raise BadWeights(f"weights sum to {total!r}, expected 1.0")
    return ws


@dataclass(frozen=True)
class RatingEdge:
    """One collapsed rating: reviewer -> product with value, day and spamicity.

    ``time`` is a day offset from the log epoch, ``spamicity`` the share of
    the product's raw ratings contributed by this pair (0 unless the pair
    posted more than twice).
    """

    reviewer: str
    product: str
    value: float
    time: int
    spamicity: float = 0.0

    def __post_init__(self):
        if not self.reviewer or not self.product:
            raise ValueError("reviewer and product ids must be non-empty")
        if not isfinite(self.value) or self.value < 1.0:
            raise ValueError(f"rating value must be >= 1, got {self.value!r}")
        if self.time < 0:
            raise ValueError(f"time must be a non-negative day offset, got {self.time!r}")
        if not 0.0 <= self.spamicity <= 1.0:
            raise ValueError(f"spamicity must lie in [0, 1], got {self.spamicity!r}")


class RatingGraph:
    """Immutable bipartite reviewer/product graph indexed both ways.

    Construction rejects duplicate (reviewer, product) pairs and values above
    ``max_value``. All iteration orders are lexicographic so downstream
    results are reproducible byte for byte.
    """

    __slots__ = ("_by_reviewer", "_by_product", "_reviewers", "_products",
                 "_max_value", "_epoch", "_n_edges")

    def __init__(self, edges: Iterable[RatingEdge],
                 max_value: float = DEFAULT_MAX_VALUE,
                 epoch: date | None = None):
        by_r: dict[str, dict[str, RatingEdge]] = {}
        by_p: dict[str, dict[str, RatingEdge]] = {}
        n = 0
        for e in edges:
            if e.value > max_value:
                raise ValueError(
                    f"rating {e.value!r} by {e.reviewer!r} on {e.product!r} "
                    f"exceeds max_value={max_value!r}")
            row = by_r.setdefault(e.reviewer, {})
            if e.product in row:
                raise DuplicateEdge(e.reviewer, e.product)
            row[e.product] = e
            by_p.setdefault(e.product, {})[e.reviewer] = e
            n += 1
        self._by_reviewer = by_r
        self._by_product = by_p
        self._reviewers = tuple(sorted(by_r))
        self._products = tuple(sorted(by_p))
        self._max_value = float(max_value)
        self._epoch = epoch
        self._n_edges = n

    @property
    def reviewers(self) -> tuple[str, ...]:
        return self._reviewers

    @property
    def products(self) -> tuple[str, ...]:
        return self._products

    @property
    def max_value(self) -> float:
        return self._max_value

    @property
    def epoch(self) -> date | None:
        return self._epoch

    def __len__(self) -> int:
        return self._n_edges

    def __bool__(self) -> bool:
        return self._n_edges > 0

    def edge(self, reviewer: str, product: str) -> RatingEdge:
        return self._by_reviewer[reviewer][product]

    def has_edge(self, reviewer: str, product: str) -> bool:
        row = self._by_reviewer.get(reviewer)
        return row is not None and product in row

    def products_of(self, reviewer: str) -> tuple[str, ...]:
        return tuple(sorted(self._by_reviewer[reviewer]))

    def reviewers_of(self, product: str) -> tuple[str, ...]:
        return tuple(sorted(self._by_product[product]))

    def edges_of_reviewer(self, reviewer: str) -> tuple[RatingEdge, ...]:
        row = self._by_reviewer[reviewer]
        return tuple(row[p] for p in sorted(row))

    def edges_of_product(self, product: str) -> tuple[RatingEdge, ...]:
        col = self._by_product[product]
        return tuple(col[r] for r in sorted(col))

    def edges(self) -> Iterator[RatingEdge]:
        for r in self._reviewers:
            row = self._by_reviewer[r]
            for p in sorted(row):
                yield row[p]

    # -- snapshot format ---------------------------------------------------
    # Line 1 is a header with the scale and epoch, every further line is one
    # edge. The writer is canonical, so save -> load -> save is byte-identical.

    def snapshot(self) -> str:
        header = {"max_value": self._max_value,
                  "epoch": self._epoch.isoformat() if self._epoch else None}
        lines = [json.dumps(header, separators=(",", ":"))]
        for e in self.edges():
            lines.append(json.dumps(
                {"r": e.reviewer, "p": e.product, "v": e.value,
                 "t": e.time, "s": e.spamicity},
                separators=(",", ":")))
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fp:
            fp.write(self.snapshot())

    @classmethod
    def loads(cls, text: str) -> "RatingGraph":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty snapshot: header line missing")
        header = json.loads(lines[0])
        epoch = date.fromisoformat(header["epoch"]) if header.get("epoch") else None
        edges = []
        for ln in lines[1:]:
            rec = json.loads(ln)
            edges.append(RatingEdge(rec["r"], rec["p"], float(rec["v"]),
                                    int(rec["t"]), float(rec["s"])))
        return cls(edges, max_value=float(header["max_value"]), epoch=epoch)

    @classmethod
    def load(cls, path) -> "RatingGraph":
        with open(path, "r", encoding="utf-8") as fp:
            return cls.loads(fp.read())


@dataclass(frozen=True)
class Biclique:
    """A complete reviewer x product rectangle with its rating edges.

    Identity (equality, hashing, ordering) is the pair of sorted id tuples;
    the edge grid is carried along for indicator computation.
    """

    reviewers: tuple[str, ...]
    products: tuple[str, ...]
    edges: tuple[RatingEdge, ...] = field(compare=False, repr=False)

    def __post_init__(self):
        if len(self.edges) != len(self.reviewers) * len(self.products):
            raise ValueError("edge grid does not match the id sets")

    @classmethod
    def from_graph(cls, reviewers: Iterable[str], products: Iterable[str],
                   graph: RatingGraph) -> "Biclique":
        """Build a biclique, checking completeness against the graph."""
        rs = tuple(sorted(set(reviewers)))
        ps = tuple(sorted(set(products)))
        if not rs or not ps:
            raise ValueError("a biclique needs at least one reviewer and one product")
        grid = []
        for r in rs:
            for p in ps:
                try:
                    grid.append(graph.edge(r, p))
                except KeyError:
                    raise MissingEdge(r, p) from None
        return cls(rs, ps, tuple(grid))

    @property
    def key(self) -> tuple[tuple[str, ...], tuple[str, ...]]:
        return (self.reviewers, self.products)

    def edge(self, reviewer: str, product: str) -> RatingEdge:
        i = self.reviewers.index(reviewer)
        j = self.products.index(product)
        return self.edges[i * len(self.products) + j]

    def values_of(self, reviewer: str) -> tuple[float, ...]:
        """The reviewer's rating vector over this group's products."""
        i = self.reviewers.index(reviewer)
        w = len(self.products)
        return tuple(e.value for e in self.edges[i * w:(i + 1) * w])

    def edges_on(self, product: str) -> tuple[RatingEdge, ...]:
        j = self.products.index(product)
        w = len(self.products)
        return tuple(self.edges[i * w + j] for i in range(len(self.reviewers)))

    def to_dict(self) -> dict:
        return {"reviewers": list(self.reviewers), "products": list(self.products)}


@dataclass(frozen=True)
class IndicatorReport:
    """The six group indicators plus their two aggregates, all in [0, 1]."""

    gvs: float   # group value similarity: min pairwise rating-vector cosine
    gts: float   # group time similarity: tightest per-product posting window
    grs: float   # group rating spamicity: value-weighted duplicate share
    gms: float   # group member suspiciousness: share of globally flagged members
    gs: float    # group size relative to the largest examined group
    gps: float   # group target-set size relative to the largest examined
    doc: float   # degree of collusiveness: weighted sum of the first four
    di: float    # damaging impact: mean of gps and gs

    def __post_init__(self):
        for name in ("gvs", "gts", "grs", "gms", "gs", "gps", "doc", "di"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v!r} outside [0, 1]")

    def quadruple(self) -> tuple[float, float, float, float]:
        return (self.gvs, self.gts, self.grs, self.gms)

    def to_dict(self) -> dict:
        return {"gvs": self.gvs, "gts": self.gts, "grs": self.grs,
                "gms": self.gms, "gs": self.gs, "gps": self.gps,
                "doc": self.doc, "di": self.di}


@dataclass(frozen=True)
class DetectionConfig:
    """Run parameters shared across ingest, mining, scoring and queries."""

    min_r: int = 2                 # smallest group size worth examining
    min_p: int = 3                 # smallest co-rated product set
    max_tw: int = 30               # widest posting window (days) still suspicious
    delta: float = 0.4             # collusiveness threshold
    weights: tuple[float, float, float, float] = (0.25, 0.25, 0.25, 0.25)
    prune_reviewer_min: int = 10   # min distinct products per kept reviewer
    prune_product_min: int = 10    # min raw ratings per kept product
    max_value: float = DEFAULT_MAX_VALUE
    candidate_cap: int = 100_000   # abort mining beyond this many candidates

    def __post_init__(self):
        object.__setattr__(self, "weights", validate_weights(self.weights))
        if self.min_r < 2:
            raise ValueError(f"min_r must be >= 2, got {self.min_r}")
        if self.min_p < 2:
            raise ValueError(f"min_p must be >= 2, got {self.min_p}")
        if self.max_tw < 1:
            raise ValueError(f"max_tw must be a positive day count, got {self.max_tw}")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")
        if self.prune_reviewer_min < 0 or self.prune_product_min < 0:
            raise ValueError("prune thresholds must be non-negative")
        if self.max_value <= 1.0:
            raise ValueError(f"max_value must exceed 1, got {self.max_value}")
        if self.candidate_cap < 1:
            raise ValueError(f"candidate_cap must be positive, got {self.candidate_cap}")

    def to_dict(self) -> dict:
        return {"min_r": self.min_r, "min_p": self.min_p, "max_tw": self.max_tw,
                "delta": self.delta, "weights": list(self.weights),
                "prune_reviewer_min": self.prune_reviewer_min,
                "prune_product_min": self.prune_product_min,
                "max_value": self.max_value, "candidate_cap": self.candidate_cap}

    @classmethod
    def from_dict(cls, data: Mapping) -> "DetectionConfig":
        known = {f: data[f] for f in ("min_r", "min_p", "max_tw", "delta", "weights",
                                      "prune_reviewer_min", "prune_product_min",
                                      "max_value", "candidate_cap") if f in data}
        if "weights" in known:
            known["weights"] = tuple(known["weights"])
        return cls(**known)
