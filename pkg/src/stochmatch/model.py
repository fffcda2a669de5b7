"""Stochastic arrival-departure models.

A model is an undirected graph whose vertices live during known integer
intervals ``[arrival, deadline]`` and die at a random time drawn from an
independent per-vertex distribution over that interval.  Models are
immutable; every derived object (conditioned submodels, instantiations,
DP states) keeps the original vertex ids.

Probabilities are either floats or :class:`fractions.Fraction`; arithmetic
is generic so a model built from fractions yields exact results downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Union

from .errors import ModelError

Prob = Union[float, Fraction]
Edge = tuple[int, int]
AliveSet = frozenset[int]

SUM_TOLERANCE = 1e-9


def edge_key(u: int, v: int) -> Edge:
    """Canonical form of an undirected edge: smaller id first."""
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True)
class VertexSpec:
    id: int
    arrival: int
    deadline: int
    death_dist: tuple[Prob, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "death_dist", tuple(self.death_dist))

    @property
    def interval(self) -> tuple[int, int]:
        return (self.arrival, self.deadline)

    def prob(self, t: int) -> Prob:
        """Pr[d_v = t]; zero outside the life interval."""
        if self.arrival <= t <= self.deadline:
            return self.death_dist[t - self.arrival]
        return 0

    def tail(self, t: int) -> Prob:
        """Pr[d_v >= t]."""
        if t <= self.arrival:
            return sum(self.death_dist)
        if t > self.deadline:
            return 0
        return sum(self.death_dist[t - self.arrival:])

    def hazard(self, t: int) -> Prob:
        """Conditional probability of dying at ``t`` given alive at ``t``."""
        if t >= self.deadline:
            return 1
        tail = self.tail(t)
        if tail <= 0:
            raise ModelError(f"vertex {self.id} cannot be alive at t={t}")
        return self.prob(t) / tail

    def support(self) -> tuple[int, ...]:
        return tuple(self.arrival + i for i, p in enumerate(self.death_dist) if p > 0)


@dataclass(frozen=True)
class StochasticModel:
    """Underlying graph plus per-vertex life intervals and death distributions.

    Construction normalizes order (vertices by id, edges as sorted
    ``(small, large)`` pairs) but does not validate; see
    :func:`validate_model` and :meth:`check`.
    """

    vertices: tuple[VertexSpec, ...]
    edges: tuple[Edge, ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "vertices", tuple(sorted(self.vertices, key=lambda v: v.id)))
        object.__setattr__(self, "edges", tuple(sorted(edge_key(int(u), int(v)) for u, v in self.edges)))

    @cached_property
    def lifetime(self) -> int:
        return max((v.deadline for v in self.vertices), default=0)

    @cached_property
    def _by_id(self) -> dict[int, VertexSpec]:
        return {v.id: v for v in self.vertices}

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(v.id for v in self.vertices)

    @property
    def n(self) -> int:
        return len(self.vertices)

    def vertex(self, vid: int) -> VertexSpec:
        try:
            return self._by_id[vid]
        except KeyError:
            raise ModelError(f"unknown vertex {vid}") from None

    def __contains__(self, vid: object) -> bool:
        return vid in self._by_id

    @cached_property
    def _edge_set(self) -> frozenset[Edge]:
        return frozenset(self.edges)

    def has_edge(self, u: int, v: int) -> bool:
        return edge_key(u, v) in self._edge_set

    def arrivals_at(self, t: int) -> AliveSet:
        return frozenset(v.id for v in self.vertices if v.arrival == t)

    def induced_edges(self, alive: Iterable[int]) -> tuple[Edge, ...]:
        """E(s): underlying edges with both endpoints in ``alive``."""
        alive = set(alive)
        return tuple(e for e in self.edges if e[0] in alive and e[1] in alive)

    def without_vertices(self, removed: Iterable[int]) -> StochasticModel:
        removed = set(removed)
        return StochasticModel(
            tuple(v for v in self.vertices if v.id not in removed),
            tuple(e for e in self.edges if e[0] not in removed and e[1] not in removed),
        )

    @property
    def is_rational(self) -> bool:
        return all(isinstance(p, (Fraction, int)) for v in self.vertices for p in v.death_dist)

    def to_rational(self) -> StochasticModel:
        """Copy with every probability as an exact fraction.

        Floats are snapped to the nearest fraction with denominator at most
        1e9; if the snapped entries miss 1 by at most the sum tolerance, the
        last positive entry absorbs the difference so sums are exactly 1.
        """
        if self.is_rational:
            return self
        return StochasticModel(tuple(_rational_vertex(v) for v in self.vertices), self.edges)

    def to_float(self) -> StochasticModel:
        return StochasticModel(
            tuple(VertexSpec(v.id, v.arrival, v.deadline, tuple(float(p) for p in v.death_dist))
                  for v in self.vertices),
            self.edges,
        )

    def check(self) -> StochasticModel:
        """Return ``self`` if valid, else raise :class:`ModelError`."""
        report = validate_model(self)
        if not report.ok:
            raise ModelError("invalid model: " + "; ".join(report.violations))
        return self


def _rational_vertex(v: VertexSpec) -> VertexSpec:
    dist = [Fraction(p).limit_denominator(10**9) for p in v.death_dist]
    gap = 1 - sum(dist)
    if gap and abs(gap) <= SUM_TOLERANCE:
        last = max(i for i, p in enumerate(dist) if p > 0)
        dist[last] += gap
    return VertexSpec(v.id, v.arrival, v.deadline, tuple(dist))


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def _fmt(x: Prob) -> str:
    return f"{float(x):.12g}"


def validate_model(m: StochasticModel) -> ValidationReport:
    """Collect every violated model invariant; never raises."""
    out: list[str] = []
    seen: set[int] = set()
    for v in m.vertices:
        if not isinstance(v.id, int) or isinstance(v.id, bool) or v.id < 0:
            out.append(f"vertex {v.id!r}: id must be a non-negative integer")
        if v.id in seen:
            out.append(f"vertex {v.id}: duplicate id")
        seen.add(v.id)
        if v.arrival < 1:
            out.append(f"vertex {v.id}: arrival {v.arrival} < 1")
        if v.arrival > v.deadline:
            out.append(f"vertex {v.id}: arrival {v.arrival} after deadline {v.deadline}")
            continue
        length = v.deadline - v.arrival + 1
        if len(v.death_dist) != length:
            out.append(f"vertex {v.id}: distribution length {len(v.death_dist)} "
                       f"≠ interval length {length}")
        bad = [p for p in v.death_dist if not (isinstance(p, (int, float, Fraction))
                                              and math.isfinite(p) and p >= 0)]
        if bad:
            out.append(f"vertex {v.id}: distribution has invalid entries {bad!r}")
            continue
        total = sum(v.death_dist)
        if abs(total - 1) > SUM_TOLERANCE:
            out.append(f"vertex {v.id}: distribution sums to {_fmt(total)}")

    pairs: set[Edge] = set()
    for u, w in m.edges:
        if u == w:
            out.append(f"edge ({u},{w}): self-loop")
            continue
        if (u, w) in pairs:
            out.append(f"edge ({u},{w}): duplicate edge")
        pairs.add((u, w))
        missing = [x for x in (u, w) if x not in m]
        if missing:
            out.append(f"edge ({u},{w}): undeclared vertex {missing[0]}")
            continue
        a, b = m.vertex(u), m.vertex(w)
        if max(a.arrival, b.arrival) > min(a.deadline, b.deadline):
            out.append(f"edge ({u},{w}): disjoint life intervals "
                       f"[{a.arrival},{a.deadline}] and [{b.arrival},{b.deadline}]")
    return ValidationReport(tuple(out))


def edge_presence_probability(m: StochasticModel, e: Edge) -> Prob:
    """Probability that ``e`` appears in a random instantiation.

    Both endpoints must survive to the later arrival of the two; deaths are
    independent, so this is the product of two tail probabilities.
    """
    u, v = edge_key(*e)
    if not m.has_edge(u, v):
        raise ModelError(f"edge ({u},{v}) is not in the model")
    a, b = m.vertex(u), m.vertex(v)
    start = max(a.arrival, b.arrival)
    return a.tail(start) * b.tail(start)


def conditioned_submodel(m: StochasticModel, s: Iterable[int], t: int) -> StochasticModel:
    """The model restarted at timestep ``t`` with alive set ``s``.

    Keeps vertices that are alive (``s``) or have not arrived yet
    (arrival >= t).  Survivors get arrival ``t`` and their death distribution
    conditioned on surviving to ``t``.
    """
    s = frozenset(s)
    if t < 0:
        raise ModelError(f"timestep must be non-negative, got {t}")
    new_vertices: list[VertexSpec] = []
    for vid in sorted(s):
        v = m.vertex(vid)
        if not v.arrival <= t <= v.deadline:
            raise ModelError(f"vertex {vid} with interval [{v.arrival},{v.deadline}] "
                             f"cannot be alive at t={t}")
        tail = v.tail(t)
        if tail <= 0:
            raise ModelError(f"vertex {vid} survives to t={t} with probability 0")
        if v.arrival == t:
            new_vertices.append(v)
        else:
            dist = tuple(p / tail for p in v.death_dist[t - v.arrival:])
            new_vertices.append(VertexSpec(vid, t, v.deadline, dist))
    new_vertices.extend(v for v in m.vertices if v.arrival >= t and v.id not in s)

    kept = {v.id: v for v in new_vertices}
    edges = []
    for u, w in m.edges:
        if u in kept and w in kept:
            a, b = kept[u], kept[w]
            if max(a.arrival, b.arrival) <= min(a.deadline, b.deadline):
                edges.append((u, w))
    return StochasticModel(tuple(new_vertices), tuple(edges))
