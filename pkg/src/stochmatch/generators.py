"""Model families and seeded random instances."""

from __future__ import annotations

import random
from fractions import Fraction

from .errors import ModelError
from .model import StochasticModel, VertexSpec


def make_sn_family(n: int, *, rational: bool = False) -> StochasticModel:
    """The clique-plus-pendants family S_n.

    Vertices ``0..n-1`` form the clique L; each arrives at 1 and dies at 1 or
    2 with probability 1/2.  Vertex ``n+i`` is the pendant of ``i`` and lives
    only at timestep 2.
    """
    if n < 1:
        raise ModelError(f"S_n needs n >= 1, got {n}")
    half = Fraction(1, 2) if rational else 0.5
    one = Fraction(1) if rational else 1.0
    verts = [VertexSpec(i, 1, 2, (half, half)) for i in range(n)]
    verts += [VertexSpec(n + i, 2, 2, (one,)) for i in range(n)]
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    edges += [(i, n + i) for i in range(n)]
    return StochasticModel(tuple(verts), tuple(edges)).check()


def pendant_triangle_model(eps: float | Fraction = 0.1) -> StochasticModel:
    """Three long-lived vertices u1..u3 (ids 0-2) and three day-3 vertices v1..v3 (ids 3-5).

    Each u dies at 1, 2, 3 with probabilities (eps, eps, 1 - 2 eps).  The
    u's form a triangle and u_i is joined to v_i.
    """
    if not 0 <= eps <= 0.5:
        raise ModelError(f"eps must lie in [0, 1/2], got {eps}")
    one = Fraction(1) if isinstance(eps, Fraction) else 1.0
    verts = [VertexSpec(i, 1, 3, (eps, eps, one - 2 * eps)) for i in range(3)]
    verts += [VertexSpec(3 + i, 3, 3, (one,)) for i in range(3)]
    edges = [(0, 1), (0, 2), (1, 2), (0, 3), (1, 4), (2, 5)]
    return StochasticModel(tuple(verts), tuple(edges)).check()


def random_model(n: int, horizon: int, seed: int, *, edge_prob: float = 0.5,
                 rational: bool = False, max_weight: int = 4) -> StochasticModel:
    """A random valid model on ``n`` vertices with lifetime at most ``horizon``.

    Death distributions are integer weights in ``0..max_weight`` normalized
    to one, so zero-mass entries occur.  Every pair with intersecting
    intervals becomes an edge with probability ``edge_prob``.
    """
    rng = random.Random(seed)
    verts = []
    for vid in range(n):
        a = rng.randint(1, horizon)
        b = rng.randint(a, horizon)
        weights = [rng.randint(0, max_weight) for _ in range(b - a + 1)]
        if not any(weights):
            weights[rng.randrange(len(weights))] = 1
        total = sum(weights)
        dist = tuple(Fraction(w, total) for w in weights)
        if not rational:
            dist = tuple(float(p) for p in dist)
        verts.append(VertexSpec(vid, a, b, dist))
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            u, v = verts[i], verts[j]
            if max(u.arrival, v.arrival) <= min(u.deadline, v.deadline) and rng.random() < edge_prob:
                edges.append((i, j))
    return StochasticModel(tuple(verts), tuple(edges)).check()


def from_generator(spec: str) -> StochasticModel:
    """Build a model from a namespaced generator string.

    ``sn:N``, ``tri:EPS`` (EPS may be a fraction like ``1/10``) and
    ``random:N:T:SEED[:EDGE_PROB]``.
    """
    family, _, rest = spec.partition(":")
    args = rest.split(":") if rest else []
    try:
        if family == "sn" and len(args) == 1:
            return make_sn_family(int(args[0]))
        if family == "tri" and len(args) <= 1:
            eps = Fraction(args[0]) if args and "/" in args[0] else float(args[0]) if args else 0.1
            return pendant_triangle_model(eps)
        if family == "random" and len(args) in (3, 4):
            p = float(args[3]) if len(args) == 4 else 0.5
            return random_model(int(args[0]), int(args[1]), int(args[2]), edge_prob=p)
    except (ValueError, ZeroDivisionError) as exc:
        raise ModelError(f"bad generator arguments in {spec!r}: {exc}") from exc
    raise ModelError(f"unknown generator {spec!r}; expected sn:N, tri:EPS or random:N:T:SEED[:P]")
