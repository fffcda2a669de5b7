"""Instantiations: sampling, induced static graphs, realizations, enumeration.

Sampling is counter-based.  Sample ``i`` of stream ``r`` under master seed
``s`` reads its uniforms from a Philox block range that depends only on
``(s, r, i)``, so any batch split reproduces the same draws.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterator

import numpy as np

from .errors import CapExceededError, ModelError
from .matching import StaticGraph
from .model import AliveSet, Prob, StochasticModel

DEFAULT_ENUM_CAP = 10**7
ENUM_CAP_ENV = "STOCHMATCH_MAX_ENUM"


def enumeration_cap() -> int:
    raw = os.environ.get(ENUM_CAP_ENV)
    return int(raw) if raw else DEFAULT_ENUM_CAP


@dataclass(frozen=True)
class Instantiation:
    """One death time per vertex, stored as sorted ``(vertex, death)`` pairs."""

    deaths: tuple[tuple[int, int], ...]

    @classmethod
    def from_dict(cls, death_times: dict[int, int]) -> Instantiation:
        return cls(tuple(sorted((int(v), int(d)) for v, d in death_times.items())))

    @cached_property
    def death_times(self) -> dict[int, int]:
        return dict(self.deaths)

    def __getitem__(self, vid: int) -> int:
        return self.death_times[vid]


@dataclass(frozen=True)
class Realization:
    """Alive sets for t = 1..T; ``snapshots[t - 1]`` is the alive set at ``t``."""

    snapshots: tuple[AliveSet, ...]

    def alive(self, t: int) -> AliveSet:
        return self.snapshots[t - 1]

    def __len__(self) -> int:
        return len(self.snapshots)


def check_instantiation(m: StochasticModel, inst: Instantiation) -> None:
    if set(inst.death_times) != set(m.ids):
        raise ModelError("instantiation does not cover exactly the model's vertices")
    for v in m.vertices:
        d = inst[v.id]
        if not v.arrival <= d <= v.deadline or v.prob(d) <= 0:
            raise ModelError(f"vertex {v.id}: death time {d} has zero probability")


class _Sampler:
    def __init__(self, m: StochasticModel) -> None:
        self.ids = m.ids
        self.arrivals = np.array([v.arrival for v in m.vertices], dtype=np.int64)
        self.cdfs = []
        self.last = []
        for v in m.vertices:
            dist = np.array([float(p) for p in v.death_dist])
            self.cdfs.append(np.cumsum(dist))
            self.last.append(int(np.flatnonzero(dist > 0)[-1]))
        # Philox yields four doubles per counter block.
        self.blocks = max(1, math.ceil(len(self.ids) / 4))

    def deaths(self, seed: int, stream: int, start: int, count: int) -> np.ndarray:
        n = len(self.ids)
        if n == 0 or count == 0:
            return np.zeros((count, n), dtype=np.int64)
        key = np.random.SeedSequence([seed % 2**64, stream]).generate_state(2, np.uint64)
        bitgen = np.random.Philox(key=key)
        bitgen.advance(start * self.blocks)
        u = np.random.Generator(bitgen).random(count * self.blocks * 4)
        u = u.reshape(count, self.blocks * 4)[:, :n]
        out = np.empty((count, n), dtype=np.int64)
        for j in range(n):
            idx = np.searchsorted(self.cdfs[j], u[:, j], side="right")
            out[:, j] = self.arrivals[j] + np.minimum(idx, self.last[j])
        return out


@lru_cache(maxsize=256)
def _sampler(m: StochasticModel) -> _Sampler:
    return _Sampler(m)


def sample_death_matrix(m: StochasticModel, seed: int, start: int, count: int,
                        stream: int = 0) -> np.ndarray:
    """Death times of samples ``start .. start+count-1``; columns follow ``m.ids``."""
    return _sampler(m).deaths(seed, stream, start, count)


def sample_instantiation(m: StochasticModel, seed: int, index: int, stream: int = 0) -> Instantiation:
    row = sample_death_matrix(m, seed, index, 1, stream)[0]
    return Instantiation(tuple(zip(m.ids, (int(d) for d in row))))


def instantiation_graph(m: StochasticModel, inst: Instantiation) -> StaticGraph:
    """Underlying edges whose endpoints' realized lifetimes overlap."""
    edges = []
    for u, v in m.edges:
        start = max(m.vertex(u).arrival, m.vertex(v).arrival)
        if start <= min(inst[u], inst[v]):
            edges.append((u, v))
    return StaticGraph(m.ids, edges)


def realization_of(m: StochasticModel, inst: Instantiation) -> Realization:
    snaps = []
    for t in range(1, m.lifetime + 1):
        snaps.append(frozenset(v.id for v in m.vertices if v.arrival <= t <= inst[v.id]))
    return Realization(tuple(snaps))


def instantiation_count(m: StochasticModel) -> int:
    return math.prod(len(v.support()) for v in m.vertices)


def enumerate_instantiations(m: StochasticModel, *, rational: bool = False,
                             cap: int | None = None) -> Iterator[tuple[Instantiation, Prob]]:
    """Every positive-probability death vector with its probability.

    With ``rational=True`` probabilities are exact fractions.
    """
    cap = enumeration_cap() if cap is None else cap
    count = instantiation_count(m)
    if count > cap:
        raise CapExceededError(f"{count} instantiations exceed the enumeration cap {cap}; "
                               "use Monte-Carlo estimation instead")
    if rational:
        m = m.to_rational()
    choices = [[(d, v.prob(d)) for d in v.support()] for v in m.vertices]
    ids = m.ids
    one: Prob = Fraction(1) if rational else 1.0
    for combo in itertools.product(*choices):
        p = one
        for _, q in combo:
            p = p * q
        yield Instantiation(tuple(zip(ids, (d for d, _ in combo)))), p
