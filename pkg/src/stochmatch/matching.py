"""Maximum-cardinality matching on static general graphs.

``max_matching`` is Edmonds' blossom algorithm (O(V^3)); the brute-force
matcher is an independent subset recursion used as a test oracle.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

from .errors import CapExceededError
from .model import Edge, edge_key

Matching = frozenset[Edge]

BRUTE_FORCE_EDGE_CAP = 30


@dataclass(frozen=True)
class StaticGraph:
    """A simple undirected graph on integer vertex ids.

    Loops, parallel edges and edges to unknown vertices are rejected here
    so matchers never see them.
    """

    vertices: frozenset[int]
    edges: frozenset[Edge]

    def __init__(self, vertices: Iterable[int], edges: Iterable[Sequence[int]] = ()) -> None:
        verts = frozenset(vertices)
        seen: set[Edge] = set()
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if u not in verts or v not in verts:
                raise ValueError(f"edge ({u},{v}) has an endpoint outside the vertex set")
            e = edge_key(u, v)
            if e in seen:
                raise ValueError(f"parallel edge ({u},{v})")
            seen.add(e)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "edges", frozenset(seen))

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)

    def adjacency(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {v: [] for v in sorted(self.vertices)}
        for u, v in self.sorted_edges():
            adj[u].append(v)
            adj[v].append(u)
        for nbrs in adj.values():
            nbrs.sort()
        return adj


def is_matching(g: StaticGraph, m: Iterable[Edge]) -> bool:
    used: set[int] = set()
    for u, v in m:
        if edge_key(u, v) not in g.edges or u in used or v in used:
            return False
        used.update((u, v))
    return True


def is_maximal(g: StaticGraph, m: Iterable[Edge]) -> bool:
    used = {x for e in m for x in e}
    return all(u in used or v in used for u, v in g.edges)


def max_matching(g: StaticGraph) -> Matching:
    """A maximum-cardinality matching of ``g``.

    Vertices are processed in ascending id order and adjacency lists are
    sorted, so the result is deterministic; callers should rely only on its
    size.
    """
    order = sorted(g.vertices)
    index = {v: i for i, v in enumerate(order)}
    n = len(order)
    adj = [[index[w] for w in nbrs] for nbrs in g.adjacency().values()]
    match = [-1] * n

    # Greedy warm start; augmentation below fixes any suboptimal choice.
    for v in range(n):
        if match[v] == -1:
            for w in adj[v]:
                if match[w] == -1:
                    match[v], match[w] = w, v
                    break

    for root in range(n):
        if match[root] == -1 and adj[root]:
            end, parent = _find_augmenting_path(root, adj, match)
            while end != -1:
                pv = parent[end]
                nxt = match[pv]
                match[end], match[pv] = pv, end
                end = nxt

    return frozenset(edge_key(order[v], order[match[v]]) for v in range(n) if match[v] > v)


def _find_augmenting_path(root: int, adj: list[list[int]], match: list[int]) -> tuple[int, list[int]]:
    n = len(adj)
    used = [False] * n
    parent = [-1] * n
    base = list(range(n))
    used[root] = True
    queue = deque([root])

    def lca(a: int, b: int) -> int:
        seen = [False] * n
        while True:
            a = base[a]
            seen[a] = True
            if match[a] == -1:
                break
            a = parent[match[a]]
        while True:
            b = base[b]
            if seen[b]:
                return b
            b = parent[match[b]]

    def mark_path(v: int, b: int, child: int, blossom: list[bool]) -> None:
        while base[v] != b:
            blossom[base[v]] = blossom[base[match[v]]] = True
            parent[v] = child
            child = match[v]
            v = parent[match[v]]

    while queue:
        v = queue.popleft()
        for to in adj[v]:
            if base[v] == base[to] or match[v] == to:
                continue
            if to == root or (match[to] != -1 and parent[match[to]] != -1):
                # odd cycle: contract the blossom onto its base
                cur = lca(v, to)
                blossom = [False] * n
                mark_path(v, cur, to, blossom)
                mark_path(to, cur, v, blossom)
                for i in range(n):
                    if blossom[base[i]]:
                        base[i] = cur
                        if not used[i]:
                            used[i] = True
                            queue.append(i)
            elif parent[to] == -1:
                parent[to] = v
                if match[to] == -1:
                    return to, parent
                used[match[to]] = True
                queue.append(match[to])
    return -1, parent


def brute_force_max_matching(g: StaticGraph, *, edge_cap: int = BRUTE_FORCE_EDGE_CAP) -> int:
    """Maximum matching size by exhaustive recursion over vertex subsets.

    The lowest remaining vertex is either left unmatched or matched to one
    of its remaining neighbours; results are memoized per vertex subset.
    """
    if len(g.edges) > edge_cap:
        raise CapExceededError(f"brute force limited to {edge_cap} edges, graph has {len(g.edges)}")
    order = sorted(v for v in g.vertices if any(v in e for e in g.edges))
    index = {v: i for i, v in enumerate(order)}
    nbr_mask = [0] * len(order)
    for u, v in g.edges:
        nbr_mask[index[u]] |= 1 << index[v]
        nbr_mask[index[v]] |= 1 << index[u]

    @lru_cache(maxsize=None)
    def best(mask: int) -> int:
        if not mask:
            return 0
        low = mask & -mask
        i = low.bit_length() - 1
        rest = mask ^ low
        result = best(rest)
        cand = nbr_mask[i] & rest
        while cand:
            bit = cand & -cand
            result = max(result, 1 + best(rest ^ bit))
            cand ^= bit
        return result

    return best((1 << len(order)) - 1)


def greedy_maximal_matching(g: StaticGraph, order: Sequence[Edge] | None = None) -> Matching:
    """Scan edges in ``order`` (default ascending) and keep each disjoint one."""
    if order is None:
        seq = g.sorted_edges()
    else:
        seq = [edge_key(*e) for e in order]
        if len(seq) != len(g.edges) or set(seq) != g.edges:
            raise ValueError("order must list every edge of the graph exactly once")
    used: set[int] = set()
    chosen = []
    for u, v in seq:
        if u not in used and v not in used:
            chosen.append((u, v))
            used.update((u, v))
    return frozenset(chosen)
