"""Expected hindsight-optimal matching size: exact enumeration and Monte-Carlo FPRAS.

Three quantities are supported for a model whose first decision timestep is
``start`` (1 for a fresh model, ``t`` for a conditioned submodel):

* ``opt``: expected maximum matching size of a random instantiation;
* ``opt | e``: one plus ``opt`` of the model without ``e``'s endpoints;
* ``opt | empty``: ``opt`` after discarding, in each instantiation, the
  vertices that exist only at ``start``.

The Monte-Carlo estimator averages ``k`` sampled maximum matching sizes per
run and reports the median over several runs.  Before sampling it checks
whether the best matching of the underlying graph (by appearance
probability) is so unlikely to show up that zero is returned outright.
"""

from __future__ import annotations

import logging
import math
import statistics
from dataclasses import dataclass, replace
from fractions import Fraction

import networkx as nx
import numpy as np

from .errors import ModelError
from .matching import StaticGraph, max_matching
from .model import Edge, Prob, StochasticModel, edge_key
from .sampling import enumerate_instantiations, instantiation_graph, sample_death_matrix

logger = logging.getLogger(__name__)

_CHUNK = 200_000


@dataclass(frozen=True)
class EstimatorConfig:
    """Accuracy, confidence and seeding for the Monte-Carlo estimators.

    ``sample_override`` replaces the default per-run sample count
    ``ceil(n**4 / epsilon**2)``; ``runs_override`` replaces the median
    amplification count ``ceil(amplification * ln(1/delta))``.
    """

    epsilon: float = 0.1
    delta: float = 0.25
    sample_override: int | None = None
    seed: int = 0
    runs_override: int | None = None
    amplification: float = 18.0
    budget: int = 10**7

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.sample_override is not None and self.sample_override < 1:
            raise ValueError("sample_override must be at least 1")
        if self.runs_override is not None and self.runs_override < 1:
            raise ValueError("runs_override must be at least 1")

    def sample_count(self, n: int) -> int:
        if self.sample_override is not None:
            return self.sample_override
        return max(1, math.ceil(n**4 / self.epsilon**2))

    def run_count(self) -> int:
        if self.runs_override is not None:
            return self.runs_override
        return max(1, math.ceil(self.amplification * math.log(1 / self.delta)))

    def derive(self, *tokens: int) -> EstimatorConfig:
        """Same settings under a seed mixed from ``self.seed`` and ``tokens``."""
        entropy = [self.seed % 2**64, len(tokens), *(int(x) % 2**64 for x in tokens)]
        seed = int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])
        return replace(self, seed=seed)


@dataclass(frozen=True)
class Estimate:
    value: float
    samples_used: int
    runs: int
    degenerate_zero: bool = False
    run_values: tuple[float, ...] = ()
    max_run_std: float = 0.0


# -- exact -----------------------------------------------------------------

def _dropped(m: StochasticModel, death_times: dict[int, int], drop_start: int | None) -> set[int]:
    if drop_start is None:
        return set()
    return {v.id for v in m.vertices if v.arrival == drop_start and death_times[v.id] == drop_start}


def _exact(m: StochasticModel, rational: bool, drop_start: int | None, cap: int | None) -> Prob:
    total: Prob = Fraction(0) if rational else 0.0
    sizes: dict[frozenset, int] = {}
    for inst, p in enumerate_instantiations(m, rational=rational, cap=cap):
        g = instantiation_graph(m, inst)
        gone = _dropped(m, inst.death_times, drop_start)
        edges = frozenset(e for e in g.edges if e[0] not in gone and e[1] not in gone)
        if edges not in sizes:
            sizes[edges] = len(max_matching(StaticGraph(m.ids, edges)))
        total += p * sizes[edges]
    return total


def exact_opt(m: StochasticModel, *, rational: bool = False, cap: int | None = None) -> Prob:
    """Expected hindsight maximum matching size, by full enumeration."""
    return _exact(m, rational, None, cap)


def _check_start_edge(m: StochasticModel, e: Edge, start: int) -> Edge:
    u, v = edge_key(*e)
    if not m.has_edge(u, v):
        raise ModelError(f"edge ({u},{v}) is not in the model")
    for x in (u, v):
        if m.vertex(x).arrival != start:
            raise ModelError(f"edge ({u},{v}) is not present at timestep {start}: "
                             f"vertex {x} arrives at {m.vertex(x).arrival}")
    return u, v


def exact_opt_given_edge(m: StochasticModel, e: Edge, *, start: int = 1,
                         rational: bool = False, cap: int | None = None) -> Prob:
    u, v = _check_start_edge(m, e, start)
    return 1 + exact_opt(m.without_vertices((u, v)), rational=rational, cap=cap)


def exact_opt_given_empty(m: StochasticModel, *, start: int = 1,
                          rational: bool = False, cap: int | None = None) -> Prob:
    return _exact(m, rational, start, cap)


# -- Monte-Carlo -----------------------------------------------------------

class _SizeCache:
    """Maximum matching size per distinct instantiation edge pattern."""

    def __init__(self, m: StochasticModel) -> None:
        self.m = m
        self.sizes: dict[bytes, int] = {}

    def size(self, mask_row: np.ndarray) -> int:
        key = mask_row.tobytes()
        if key not in self.sizes:
            edges = [e for e, on in zip(self.m.edges, mask_row) if on]
            self.sizes[key] = len(max_matching(StaticGraph(self.m.ids, edges)))
        return self.sizes[key]


def sample_values(m: StochasticModel, deaths: np.ndarray, *, drop_start: int | None = None,
                  cache: _SizeCache | None = None) -> np.ndarray:
    """Maximum matching size of the instantiation in each row of ``deaths``.

    ``deaths`` has one column per vertex in ``m.ids`` order.  With
    ``drop_start`` set, vertices arriving and dying at that timestep are
    removed first.
    """
    count = deaths.shape[0]
    if not m.edges or count == 0:
        return np.zeros(count, dtype=np.int64)
    col = {vid: j for j, vid in enumerate(m.ids)}
    arrivals = np.array([v.arrival for v in m.vertices], dtype=np.int64)
    us = np.array([col[u] for u, _ in m.edges])
    vs = np.array([col[v] for _, v in m.edges])
    start = np.maximum(arrivals[us], arrivals[vs])
    present = start[None, :] <= np.minimum(deaths[:, us], deaths[:, vs])
    if drop_start is not None:
        gone = (arrivals[None, :] == drop_start) & (deaths == drop_start)
        present &= ~(gone[:, us] | gone[:, vs])

    packed = np.packbits(present, axis=1)
    rows, inverse = np.unique(packed, axis=0, return_inverse=True)
    cache = cache or _SizeCache(m)
    width = len(m.edges)
    sizes = np.array([cache.size(np.unpackbits(r)[:width].astype(bool)) for r in rows],
                     dtype=np.int64)
    return sizes[inverse.reshape(-1)]


def _presence_probabilities(m: StochasticModel, drop_start: int | None) -> dict[Edge, float]:
    probs = {}
    for u, v in m.edges:
        a, b = m.vertex(u), m.vertex(v)
        first = max(a.arrival, b.arrival)
        p = 1.0
        for x in (a, b):
            need = first
            if drop_start is not None and x.arrival == drop_start:
                need = max(need, drop_start + 1)
            p *= float(x.tail(need))
        probs[(u, v)] = p
    return probs


def zero_matching_probability(m: StochasticModel, *, drop_start: int | None = None) -> float:
    """Probability that no edge of the most-likely-to-appear matching appears.

    The matching maximizes ``sum(-log(1 - p_e))`` over vertex-disjoint
    edges, i.e. minimizes the chance that all of its edges are missing.
    """
    probs = {e: p for e, p in _presence_probabilities(m, drop_start).items() if p > 0}
    if not probs:
        return 1.0
    if max(probs.values()) >= 1.0:
        return 0.0
    g = nx.Graph()
    for (u, v), p in probs.items():
        g.add_edge(u, v, weight=-math.log1p(-p))
    chosen = nx.max_weight_matching(g)
    return math.prod(1.0 - probs[edge_key(u, v)] for u, v in chosen)


def _estimate(m: StochasticModel, cfg: EstimatorConfig, drop_start: int | None) -> Estimate:
    n = m.n
    runs = cfg.run_count()
    q = zero_matching_probability(m, drop_start=drop_start)
    if n == 0 or q > 1 - 1 / n:
        return Estimate(0.0, 0, runs, degenerate_zero=True, run_values=(0.0,) * runs)

    k = cfg.sample_count(n)
    if k * runs > cfg.budget:
        logger.warning("estimator will draw %d samples (k=%d, runs=%d), above the budget of %d",
                       k * runs, k, runs, cfg.budget)
    cache = _SizeCache(m)
    run_values = []
    max_std = 0.0
    for r in range(runs):
        total = 0
        total_sq = 0
        for lo in range(0, k, _CHUNK):
            count = min(_CHUNK, k - lo)
            deaths = sample_death_matrix(m, cfg.seed, lo, count, stream=r)
            x = sample_values(m, deaths, drop_start=drop_start, cache=cache)
            total += int(x.sum())
            total_sq += int((x * x).sum())
        mean = total / k
        var = (total_sq - k * mean * mean) / (k - 1) if k > 1 else 0.0
        std = math.sqrt(max(var, 0.0))
        if std > n // 2 + 1:
            raise RuntimeError(f"sample standard deviation {std} exceeds the matching bound {n // 2 + 1}")
        max_std = max(max_std, std)
        run_values.append(mean)
    return Estimate(float(statistics.median(run_values)), k * runs, runs,
                    run_values=tuple(run_values), max_run_std=max_std)


def estimate_opt(m: StochasticModel, cfg: EstimatorConfig) -> Estimate:
    return _estimate(m, cfg, None)


def estimate_opt_given_edge(m: StochasticModel, e: Edge, cfg: EstimatorConfig, *,
                            start: int = 1) -> Estimate:
    u, v = _check_start_edge(m, e, start)
    inner = _estimate(m.without_vertices((u, v)), cfg, None)
    return replace(inner, value=1 + inner.value,
                   run_values=tuple(1 + x for x in inner.run_values))


def estimate_opt_given_empty(m: StochasticModel, cfg: EstimatorConfig, *,
                             start: int = 1) -> Estimate:
    return _estimate(m, cfg, start)
