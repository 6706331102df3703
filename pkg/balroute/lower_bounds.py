"""
Instances on which every oblivious routing is far from optimal, and a
certificate that evaluates a given routing on them.

A routing here is any map from a vertex pair (u, v) to a unit u-v flow; it
may route pairs from different sources.
"""
import enum
import math
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from .error import RoutingFailure
from .graph import (
    DirectedGraph,
    Edge,
    Flow,
    ShortestPaths,
    congestion,
    incidence_apply,
    shortest_paths,
    unit_demand,
)
from .oracles import exact_min_congestion

PairRouting = Callable[[int, int], Flow]


class LowerBoundKind(enum.Enum):
    GENERAL = "general"
    EULERIAN = "eulerian"

    def __str__(self) -> str:
        return self.value


def gen_lowerbound_general(k: int) -> DirectedGraph:
    """
    S = 0..k-1, T = k..2k-1, hub s = 2k, hub t = 2k+1. The biclique S x T has
    weight 1; S -> s, s -> t and t -> T have weight k. Not strongly connected.
    """
    if k < 1:
        raise RoutingFailure(f"The general lower-bound instance needs k >= 1, got {k}.")
    s, t = 2 * k, 2 * k + 1
    edges = [Edge(u, k + v, 1.0) for u in range(k) for v in range(k)]
    edges += [Edge(u, s, float(k)) for u in range(k)]
    edges.append(Edge(s, t, float(k)))
    edges += [Edge(t, k + v, float(k)) for v in range(k)]
    return DirectedGraph(2 * k + 2, tuple(edges), check_strongly_connected=False)


def gen_lowerbound_eulerian(n: int) -> DirectedGraph:
    """A cycle 0 -> 1 -> ... -> n-1 -> 0 of weight 1 and its reverse of weight sqrt(n)."""
    if n < 2:
        raise RoutingFailure(f"The Eulerian lower-bound instance needs n >= 2, got {n}.")
    heavy = math.sqrt(n)
    edges = [Edge(i, (i + 1) % n, 1.0) for i in range(n)]
    edges += [Edge((i + 1) % n, i, heavy) for i in range(n)]
    return DirectedGraph(n, tuple(edges))


def general_pair_demands(k: int) -> List[Tuple[int, int]]:
    return [(u, k + v) for u in range(k) for v in range(k)]


def eulerian_pair_demands(n: int) -> List[Tuple[int, int]]:
    return [(i, i + 1) for i in range(n - 1)]


def instance(kind: LowerBoundKind, param: int) -> Tuple[DirectedGraph, List[Tuple[int, int]]]:
    if kind == LowerBoundKind.GENERAL:
        return gen_lowerbound_general(param), general_pair_demands(param)
    return gen_lowerbound_eulerian(param), eulerian_pair_demands(param)


def proven_bound(kind: LowerBoundKind, param: int) -> float:
    """The ratio every routing is guaranteed to reach on the instance."""
    if kind == LowerBoundKind.GENERAL:
        return param / 2
    return math.sqrt(param - 1) / 2


def _check_unit(g: DirectedGraph, u: int, v: int, f: Flow) -> None:
    if f.shape != (g.m,) or f.min(initial=0.0) < -1e-9:
        raise RoutingFailure(f"Routing of ({u}, {v}) is not a nonnegative flow.")
    residual = incidence_apply(g, f) - unit_demand(g.n, u, v)
    if np.abs(residual).max(initial=0.0) > 1e-9:
        raise RoutingFailure(f"Routing of ({u}, {v}) does not carry one unit from {u} to {v}.")


def lowerbound_certificate(routing: PairRouting, kind: LowerBoundKind, param: int) -> float:
    """
    A lower bound on the routing's competitive ratio on the instance: the
    worst single-pair ratio, against the optimum for that pair, and the
    ratio on the sum of all pairs, whose optimum is at most 1. Both use upper
    bounds on the optimum, so the result never overstates the ratio.
    """
    g, pairs = instance(kind, param)
    total = np.zeros(g.m)
    worst = 0.0
    for u, v in pairs:
        f = np.asarray(routing(u, v), dtype=np.float64)
        _check_unit(g, u, v, f)
        total += f
        best = exact_min_congestion(g, unit_demand(g.n, u, v))
        worst = max(worst, congestion(g, f) / congestion(g, best.flow))
    return max(worst, congestion(g, total))


def path_routing(g: DirectedGraph, lengths: Sequence[float]) -> PairRouting:
    """Send every pair along its shortest path under `lengths`."""
    h = g.with_lengths(lengths)
    trees: Dict[int, ShortestPaths] = {}

    def routing(u: int, v: int) -> Flow:
        if u not in trees:
            trees[u] = shortest_paths(h, u)
        f = np.zeros(g.m)
        f[trees[u].path_to(v)] += 1.0
        return f

    return routing


def random_path_routing(g: DirectedGraph, rng: np.random.Generator, paths: int = 3) -> PairRouting:
    """A fixed random convex combination of shortest-path routings under random lengths."""
    routings = [path_routing(g, rng.uniform(0.1, 10.0, size=g.m)) for _ in range(paths)]
    mix = rng.dirichlet(np.ones(paths))

    def routing(u: int, v: int) -> Flow:
        flow = np.zeros(g.m)
        for lam, r in zip(mix, routings):
            flow += lam * r(u, v)
        return flow

    return routing
