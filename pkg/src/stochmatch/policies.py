"""Adaptive matching policies and their evaluation.

The runner reveals an instantiation one timestep at a time.  At each
timestep the policy sees only the conditioned submodel for the current alive
set and the snapshot edges, picks a matching to commit, and then the
matched vertices leave, followed by the vertices whose death time is now.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

from .errors import ModelError, PolicyError
from .estimators import (
    EstimatorConfig,
    estimate_opt_given_edge,
    estimate_opt_given_empty,
    exact_opt_given_edge,
    exact_opt_given_empty,
)
from .exact_dp import DPTable, chi_star
from .matching import StaticGraph, max_matching
from .model import AliveSet, Edge, Prob, StochasticModel, conditioned_submodel, edge_key
from .sampling import (
    Instantiation,
    check_instantiation,
    enumerate_instantiations,
    sample_death_matrix,
)

TIE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class DecisionContext:
    """Everything a policy may look at when deciding at timestep ``t``."""

    submodel: StochasticModel
    t: int
    alive: AliveSet
    edges: tuple[Edge, ...]


class Policy:
    """Base class: map a :class:`DecisionContext` to edges to commit now.

    Deterministic policies must be pure functions of the context; the
    evaluators rely on that to reuse decisions across instantiations.
    """

    name = "policy"
    deterministic = True

    def decide(self, ctx: DecisionContext) -> Iterable[Edge]:
        raise NotImplementedError


class EmptyPolicy(Policy):
    name = "empty"

    def decide(self, ctx: DecisionContext) -> Iterable[Edge]:
        return ()


class GreedyPolicy(Policy):
    """Commit a maximum matching of every snapshot."""

    name = "greedy"

    def decide(self, ctx: DecisionContext) -> Iterable[Edge]:
        return max_matching(StaticGraph(ctx.alive, ctx.edges))


class PatientPolicy(Policy):
    """Wait until the submodel's last timestep, then commit a maximum matching.

    The horizon is the submodel's lifetime, i.e. the last timestep at which
    any still-relevant vertex can be alive.
    """

    name = "patient"

    def decide(self, ctx: DecisionContext) -> Iterable[Edge]:
        if ctx.t < ctx.submodel.lifetime:
            return ()
        return max_matching(StaticGraph(ctx.alive, ctx.edges))


class SplitMatchingPolicy(Policy):
    """Grow the timestep's matching one edge at a time.

    Each round compares, on the residual alive set, the value of matching
    nothing more now against one plus the value of the rest for every
    available edge.  Matching stops only when waiting is strictly better;
    among equally good edges the smallest is taken.  Values come from exact
    enumeration (``mode="exact"``) or the Monte-Carlo estimators
    (``mode="fpras"``) seeded from the context, which keeps the policy
    deterministic.
    """

    def __init__(self, mode: str = "exact", cfg: EstimatorConfig | None = None) -> None:
        if mode not in ("exact", "fpras"):
            raise ValueError(f"unknown split-matching mode {mode!r}")
        self.mode = mode
        self.cfg = cfg or EstimatorConfig()
        self.name = f"split-matching-{mode}"
        self._memo: dict[tuple, float] = {}

    def _opt_empty(self, sub: StochasticModel, t: int) -> float:
        key = (sub, t, None)
        if key not in self._memo:
            if self.mode == "exact":
                value = float(exact_opt_given_empty(sub, start=t))
            else:
                cfg = self.cfg.derive(t, -1, *sub.ids)
                value = estimate_opt_given_empty(sub, cfg, start=t).value
            self._memo[key] = value
        return self._memo[key]

    def _opt_edge(self, sub: StochasticModel, e: Edge, t: int) -> float:
        key = (sub, t, e)
        if key not in self._memo:
            if self.mode == "exact":
                value = float(exact_opt_given_edge(sub, e, start=t))
            else:
                cfg = self.cfg.derive(t, e[0], e[1], *sub.ids)
                value = estimate_opt_given_edge(sub, e, cfg, start=t).value
            self._memo[key] = value
        return self._memo[key]

    def decide(self, ctx: DecisionContext) -> Iterable[Edge]:
        sub = ctx.submodel
        residual = set(ctx.alive)
        chosen: list[Edge] = []
        while True:
            edges = sub.induced_edges(residual)
            if not edges:
                break
            wait = self._opt_empty(sub, ctx.t)
            values = {e: self._opt_edge(sub, e, ctx.t) for e in edges}
            best = max(values.values())
            if wait > best + TIE_TOLERANCE:
                break
            pick = min(e for e in edges if values[e] >= best - TIE_TOLERANCE)
            chosen.append(pick)
            residual -= set(pick)
            sub = sub.without_vertices(pick)
        return chosen


class ExactDPPolicy(Policy):
    """Follow the optimal matchings stored in the Bellman table of ``model``.

    The table is built once from the model description (arrival times,
    deadlines, distributions), which every policy is given up front.
    Contexts from other models fall back to solving their submodel.
    """

    name = "exact-dp"

    def __init__(self, model: StochasticModel) -> None:
        self.model = model
        self._table: DPTable | None = None

    @property
    def table(self) -> DPTable:
        if self._table is None:
            _, self._table = chi_star(self.model)
        return self._table

    def decide(self, ctx: DecisionContext) -> Iterable[Edge]:
        if not ctx.edges:
            return ()
        try:
            return self.table.lookup(ctx.alive, ctx.t).matching
        except KeyError:
            _, local = chi_star(ctx.submodel)
            return local.lookup(ctx.alive, ctx.t).matching


POLICY_NAMES = ("split-matching-exact", "split-matching-fpras", "greedy", "patient", "exact-dp", "empty")


def make_policy(name: str, model: StochasticModel | None = None,
                cfg: EstimatorConfig | None = None) -> Policy:
    """Construct a policy from its registry name."""
    if name == "empty":
        return EmptyPolicy()
    if name == "greedy":
        return GreedyPolicy()
    if name == "patient":
        return PatientPolicy()
    if name == "split-matching-exact":
        return SplitMatchingPolicy("exact")
    if name == "split-matching-fpras":
        return SplitMatchingPolicy("fpras", cfg)
    if name == "exact-dp":
        if model is None:
            raise ValueError("exact-dp needs the model to build its table")
        return ExactDPPolicy(model)
    raise ValueError(f"unknown policy {name!r}; choose from {', '.join(POLICY_NAMES)}")


@dataclass(frozen=True)
class TraceStep:
    t: int
    arrivals: AliveSet
    alive: AliveSet
    matched: tuple[Edge, ...]
    deaths: AliveSet


@dataclass(frozen=True)
class PolicyTrace:
    steps: tuple[TraceStep, ...]
    matching: frozenset[Edge]

    def to_json(self) -> dict:
        return {
            "size": len(self.matching),
            "steps": [{"t": s.t, "arrivals": sorted(s.arrivals), "alive": sorted(s.alive),
                       "matched": [list(e) for e in s.matched], "deaths": sorted(s.deaths)}
                      for s in self.steps],
        }


@dataclass
class DecisionCache:
    """Decisions of one deterministic policy on one model, keyed by (alive set, t)."""

    decisions: dict[tuple[AliveSet, int], tuple[Edge, ...]] = field(default_factory=dict)


def _checked(decision: Iterable[Edge], ctx: DecisionContext) -> tuple[Edge, ...]:
    snapshot = set(ctx.edges)
    used: set[int] = set()
    out = []
    for e in decision:
        u, v = edge_key(*e)
        if (u, v) not in snapshot:
            raise PolicyError(f"policy matched ({u},{v}), which is not in the snapshot at t={ctx.t}")
        if u in used or v in used:
            raise PolicyError(f"policy matched overlapping edges at t={ctx.t}")
        used.update((u, v))
        out.append((u, v))
    return tuple(sorted(out))


def run_adaptive(m: StochasticModel, policy: Policy, inst: Instantiation, *,
                 cache: DecisionCache | None = None) -> PolicyTrace:
    """Play ``policy`` against the instantiation ``inst`` of ``m``."""
    check_instantiation(m, inst)
    if cache is not None and not policy.deterministic:
        raise ValueError("decision caching needs a deterministic policy")
    alive: set[int] = set()
    matching: list[Edge] = []
    steps = []
    for t in range(1, m.lifetime + 1):
        arrivals = m.arrivals_at(t)
        alive |= arrivals
        snapshot = frozenset(alive)
        key = (snapshot, t)
        if cache is not None and key in cache.decisions:
            chosen = cache.decisions[key]
        else:
            ctx = DecisionContext(conditioned_submodel(m, snapshot, t), t, snapshot,
                                  m.induced_edges(snapshot))
            chosen = _checked(policy.decide(ctx), ctx)
            if cache is not None:
                cache.decisions[key] = chosen
        matching.extend(chosen)
        alive -= {x for e in chosen for x in e}
        deaths = frozenset(v for v in alive if inst[v] == t)
        alive -= deaths
        steps.append(TraceStep(t, arrivals, snapshot, chosen, deaths))
    return PolicyTrace(tuple(steps), frozenset(matching))


def evaluate_policy_exact(m: StochasticModel, policy: Policy, *, rational: bool = False) -> Prob:
    """Expected final matching size over every instantiation."""
    if not policy.deterministic:
        raise ValueError("exact evaluation needs a deterministic policy; "
                         "average evaluations over policy seeds instead")
    cache = DecisionCache()
    total: Prob = 0
    for inst, p in enumerate_instantiations(m, rational=rational):
        total += p * len(run_adaptive(m, policy, inst, cache=cache).matching)
    return total


@dataclass(frozen=True)
class MCResult:
    mean: float
    stderr: float
    samples: int


def evaluate_policy_mc(m: StochasticModel, policy: Policy, samples: int, seed: int = 0) -> MCResult:
    """Mean final matching size over ``samples`` seeded instantiations."""
    if samples < 1:
        raise ModelError("need at least one sample")
    deaths = sample_death_matrix(m, seed, 0, samples)
    cache = DecisionCache() if policy.deterministic else None
    sizes = []
    for row in deaths:
        inst = Instantiation(tuple(zip(m.ids, (int(d) for d in row))))
        sizes.append(len(run_adaptive(m, policy, inst, cache=cache).matching))
    mean = sum(sizes) / samples
    var = sum((x - mean) ** 2 for x in sizes) / (samples - 1) if samples > 1 else 0.0
    return MCResult(mean, math.sqrt(var / samples), samples)

