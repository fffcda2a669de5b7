"""Exact optimal adaptive value by Bellman recursion over observable states.

A state is the alive set at a decision timestep (after that timestep's
arrivals).  Its value is the best, over every matching of the snapshot, of
the matching size plus the expected value of the successor state, where each
unmatched vertex independently dies with its conditional hazard.  Only
states reachable from the start are explored.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING, Iterable, Iterator

from .errors import CapExceededError, ModelError
from .matching import StaticGraph, max_matching
from .model import AliveSet, Edge, Prob, StochasticModel, edge_key

if TYPE_CHECKING:
    from .policies import Policy

DEFAULT_MAX_STATES = 10**6
DEFAULT_MAX_MATCHINGS = 10**6
FLOAT_TIE = 1e-12


@dataclass(frozen=True)
class DPEntry:
    value: Prob
    matching: tuple[Edge, ...]


def hazard(m: StochasticModel, vid: int, t: int) -> Prob:
    """Pr[v dies at t | v alive at t]; 1 at the deadline."""
    return m.vertex(vid).hazard(t)


def _matchings(edges: list[tuple[int, Edge]], cap: int) -> Iterator[tuple[int, tuple[Edge, ...]]]:
    """All matchings (including the empty one) as ``(vertex bitmask, edges)``.

    ``edges`` holds ``(endpoint bitmask, edge)`` in ascending edge order.
    """
    count = 0
    stack: list[Edge] = []

    def rec(i: int, used: int) -> Iterator[tuple[int, tuple[Edge, ...]]]:
        nonlocal count
        if i == len(edges):
            count += 1
            if count > cap:
                raise CapExceededError(f"more than {cap} matchings in one snapshot")
            yield used, tuple(stack)
            return
        bits, e = edges[i]
        if not used & bits:
            stack.append(e)
            yield from rec(i + 1, used | bits)
            stack.pop()
        yield from rec(i + 1, used)

    yield from rec(0, 0)


class DPTable:
    """Memoized optimal values and a lexicographically-first optimal matching per state."""

    def __init__(self, model: StochasticModel, start: int, ids: tuple[int, ...],
                 entries: dict[tuple[int, int], DPEntry]) -> None:
        self.model = model
        self.start = start
        self.ids = ids
        self._bit = {vid: 1 << i for i, vid in enumerate(ids)}
        self.entries = entries

    def mask(self, alive: Iterable[int]) -> int:
        out = 0
        for v in alive:
            out |= self._bit[v]
        return out

    def alive(self, mask: int) -> AliveSet:
        return frozenset(vid for i, vid in enumerate(self.ids) if mask >> i & 1)

    @property
    def value(self) -> Prob:
        return self.entries[(self.mask(self.model.arrivals_at(self.start)), self.start)].value

    def lookup(self, alive: Iterable[int], t: int) -> DPEntry:
        key = (self.mask(alive), t)
        if key not in self.entries:
            raise KeyError(f"state ({sorted(alive)}, t={t}) was not reached")
        return self.entries[key]

    def __len__(self) -> int:
        return len(self.entries)

    def to_json(self) -> dict:
        states = []
        for (mask, t), entry in sorted(self.entries.items(), key=lambda kv: (kv[0][1], sorted(self.alive(kv[0][0])))):
            row = {"t": t, "alive": sorted(self.alive(mask)), "value": float(entry.value),
                   "matching": [list(e) for e in entry.matching]}
            if isinstance(entry.value, Fraction):
                row["value_exact"] = str(entry.value)
            states.append(row)
        out: dict = {"value": float(self.value), "start": self.start, "states": states}
        if isinstance(self.value, Fraction):
            out["value_exact"] = str(self.value)
        return out


class _Bellman:
    def __init__(self, m: StochasticModel, rational: bool, max_states: int, max_matchings: int) -> None:
        if m.n > 64:
            raise CapExceededError(f"exact DP supports at most 64 vertices, model has {m.n}")
        self.m = m.to_rational() if rational else m
        self.rational = rational
        self.zero: Prob = Fraction(0) if rational else 0.0
        self.one: Prob = Fraction(1) if rational else 1.0
        self.ids = self.m.ids
        self.bit = {vid: 1 << i for i, vid in enumerate(self.ids)}
        self.T = self.m.lifetime
        self.arrivals = {t: self._mask(self.m.arrivals_at(t)) for t in range(0, self.T + 2)}
        self.edges = [(self.bit[u] | self.bit[v], (u, v)) for u, v in self.m.edges]
        self.hazards = {(v.id, t): v.hazard(t) for v in self.m.vertices
                        for t in range(v.arrival, v.deadline + 1) if v.tail(t) > 0}
        self.max_states = max_states
        self.max_matchings = max_matchings
        self.values: dict[tuple[int, int], DPEntry] = {}
        self.cont_memo: dict[tuple[int, int], Prob] = {}

    def _mask(self, vids: Iterable[int]) -> int:
        out = 0
        for v in vids:
            out |= self.bit[v]
        return out

    def _better(self, val: Prob, best: Prob | None) -> bool:
        if best is None:
            return True
        if self.rational:
            return val > best
        return val > best + FLOAT_TIE * max(1.0, abs(best))

    def successors(self, remaining: int, t: int) -> Iterator[tuple[int, Prob]]:
        """Survivor masks of ``remaining`` after the deaths at ``t``, with probabilities."""
        survivors = 0
        risky: list[tuple[int, Prob]] = []
        for i, vid in enumerate(self.ids):
            if not remaining >> i & 1:
                continue
            h = self.hazards[(vid, t)]
            if h == 0:
                survivors |= 1 << i
            elif h != 1:
                risky.append((1 << i, h))
        for pattern in itertools.product((False, True), repeat=len(risky)):
            p = self.one
            mask = survivors
            for (bit, h), lives in zip(risky, pattern):
                if lives:
                    p = p * (1 - h)
                    mask |= bit
                else:
                    p = p * h
            yield mask, p

    def continuation(self, remaining: int, t: int) -> Prob:
        if t >= self.T:
            return self.zero
        key = (remaining, t)
        if key not in self.cont_memo:
            total = self.zero
            nxt = self.arrivals.get(t + 1, 0)
            for mask, p in self.successors(remaining, t):
                if p:
                    total += p * self.value(mask | nxt, t + 1).value
            self.cont_memo[key] = total
        return self.cont_memo[key]

    def snapshot_edges(self, alive: int) -> list[tuple[int, Edge]]:
        return [(bits, e) for bits, e in self.edges if bits & alive == bits]

    def value(self, alive: int, t: int) -> DPEntry:
        key = (alive, t)
        if key in self.values:
            return self.values[key]
        if t > self.T:
            entry = DPEntry(self.zero, ())
        else:
            best: Prob | None = None
            best_m: tuple[Edge, ...] = ()
            for used, matching in _matchings(self.snapshot_edges(alive), self.max_matchings):
                val = len(matching) + self.continuation(alive & ~used, t)
                if self._better(val, best) or (not self._better(best, val) and matching < best_m):
                    best, best_m = val, matching
            entry = DPEntry(best, best_m)
        self.values[key] = entry
        if len(self.values) > self.max_states:
            raise CapExceededError(f"DP state count exceeded {self.max_states} "
                                   f"(reached t={t}, {len(self.cont_memo)} continuation states)")
        return entry


def chi_star(m: StochasticModel, *, rational: bool = False, max_states: int = DEFAULT_MAX_STATES,
             max_matchings: int = DEFAULT_MAX_MATCHINGS) -> tuple[Prob, DPTable]:
    """Optimal expected matching size over all adaptive policies, and its DP table.

    The recursion starts at the earliest arrival (timestep 1 for models
    built from scratch).  Ties between matchings of equal value go to the
    lexicographically smallest sorted edge tuple, the empty matching first.
    """
    solver = _Bellman(m, rational, max_states, max_matchings)
    start = min((v.arrival for v in m.vertices), default=1)
    entry = solver.value(solver.arrivals.get(start, 0), start)
    return entry.value, DPTable(solver.m, start, solver.ids, solver.values)


def verify_table(table: DPTable, *, tol: float = 1e-9) -> list[str]:
    """Recheck the Bellman equation at every stored state from stored child values.

    Returns a list of inconsistencies (empty when the table is sound).
    """
    m = table.model
    rational = m.is_rational and isinstance(table.value, Fraction)
    solver = _Bellman(m, rational, DEFAULT_MAX_STATES, DEFAULT_MAX_MATCHINGS)
    problems = []
    for (alive, t), entry in table.entries.items():
        if t > m.lifetime:
            continue
        best = None
        chosen_val = None
        for used, matching in _matchings(solver.snapshot_edges(alive), DEFAULT_MAX_MATCHINGS):
            cont = 0
            if t < m.lifetime:
                nxt = solver.arrivals.get(t + 1, 0)
                for mask, p in solver.successors(alive & ~used, t):
                    if p:
                        cont += p * table.entries[(mask | nxt, t + 1)].value
            val = len(matching) + cont
            best = val if best is None or val > best else best
            if matching == entry.matching:
                chosen_val = val
        if abs(best - entry.value) > tol:
            problems.append(f"state {sorted(table.alive(alive))}@{t}: stored {entry.value}, recomputed {best}")
        if chosen_val is None or abs(chosen_val - entry.value) > tol:
            problems.append(f"state {sorted(table.alive(alive))}@{t}: stored matching does not attain the value")
    return problems


def transition_probability(m: StochasticModel, s: Iterable[int], matching: Iterable[Edge],
                           t: int, s_next: Iterable[int]) -> Prob:
    """Probability that ``s_next`` is the alive set at ``t + 1``.

    ``s`` is the alive set at ``t`` and ``matching`` the edges matched at ``t``.
    """
    s = frozenset(s)
    s_next = frozenset(s_next)
    edges = [edge_key(*e) for e in matching]
    snapshot = set(m.induced_edges(s))
    used: set[int] = set()
    for u, v in edges:
        if (u, v) not in snapshot:
            raise ModelError(f"edge ({u},{v}) is not in the snapshot at t={t}")
        if u in used or v in used:
            raise ModelError(f"edges share a vertex in matching {edges}")
        used.update((u, v))
    remaining = s - used
    arrivals = m.arrivals_at(t + 1)
    if not arrivals <= s_next:
        raise ModelError(f"successor misses arrivals {sorted(arrivals - s_next)} of t={t + 1}")
    stray = (s_next - arrivals) - remaining
    if stray:
        raise ModelError(f"successor contains vertices {sorted(stray)} that cannot be alive at t={t + 1}")
    p: Prob = 1
    for vid in sorted(remaining):
        h = hazard(m, vid, t)
        p = p * ((1 - h) if vid in s_next else h)
    return p


def opt_hindsight(g: StaticGraph) -> int:
    """Maximum matching size of an instantiation graph."""
    return len(max_matching(g))


def stochasticity_ratio(m: StochasticModel, *, rational: bool = False) -> Prob:
    """Optimal adaptive value divided by the expected hindsight optimum."""
    from .estimators import exact_opt

    opt = exact_opt(m, rational=rational)
    if opt == 0:
        raise ModelError("stochasticity ratio is undefined: expected optimum is 0")
    chi, _ = chi_star(m, rational=rational)
    return chi / opt


def rho_metric(m: StochasticModel, policy: Policy, *, zero_opt: str = "one",
               rational: bool = False) -> Prob:
    """Expected per-instantiation ratio of the policy's matching size to opt(I).

    Instantiations with opt(I) = 0 count as ratio 1 (``zero_opt="one"``) or
    are left out and the rest renormalized (``zero_opt="skip"``).
    """
    from .policies import DecisionCache, run_adaptive
    from .sampling import enumerate_instantiations, instantiation_graph

    if zero_opt not in ("one", "skip"):
        raise ValueError("zero_opt must be 'one' or 'skip'")
    if not policy.deterministic:
        raise ValueError("rho_metric needs a deterministic policy")
    cache = DecisionCache()
    total: Prob = Fraction(0) if rational else 0.0
    mass: Prob = Fraction(0) if rational else 0.0
    for inst, p in enumerate_instantiations(m, rational=rational):
        opt = opt_hindsight(instantiation_graph(m, inst))
        if opt == 0:
            if zero_opt == "one":
                total += p
                mass += p
            continue
        size = len(run_adaptive(m, policy, inst, cache=cache).matching)
        total += p * Fraction(size, opt) if rational else p * size / opt
        mass += p
    if zero_opt == "skip":
        return total / mass if mass else (Fraction(1) if rational else 1.0)
    return total
