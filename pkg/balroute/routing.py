"""
Single-source oblivious routings as convex combinations of arborescences,
built by multiplicative weights over low-stretch arborescences, plus the
crude two-arborescence routing used to clean up flow residues.
"""
from dataclasses import dataclass
from functools import cached_property
import heapq
import logging
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .arborescence import Arborescence, edge_load, find_arborescence, total_stretch
from .error import RoutingFailure
from .graph import (
    DemandVector,
    DirectedGraph,
    Flow,
    check_demand,
    congestion,
    incidence_matrix,
    reverse,
    unit_demand,
)
from .options import DEFAULT_TOLERANCES
from .oracles import exact_min_congestion
from .trials import map_trials, make_rng, spawn_seeds

logger = logging.getLogger(__name__)

MAX_EXACT_RATIO_VERTICES = 64
# Smallest edge length handed to the arborescence search.
MIN_LENGTH = 1e-200


@dataclass(frozen=True, eq=False)
class ObliviousRouting:
    graph: DirectedGraph
    source: int
    trees: Tuple[Arborescence, ...]
    weights: Tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.trees or len(self.trees) != len(self.weights):
            raise RoutingFailure("A routing needs one positive weight per arborescence.")
        if any(not lam > 0 for lam in self.weights):
            raise RoutingFailure("Arborescence weights must be positive.")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise RoutingFailure(f"Arborescence weights sum to {sum(self.weights)}, not 1.")
        for tree in self.trees:
            if tree.root != self.source or tree.n != self.graph.n:
                raise RoutingFailure(
                    f"Every arborescence must span the graph from {self.source}."
                )

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        """m x n map sending the unit demand (source, u) to its flow, column u."""
        rows: List[int] = []
        cols: List[int] = []
        vals: List[float] = []
        for tree, lam in zip(self.trees, self.weights):
            for u in range(self.graph.n):
                for v in tree.path_from_root(u):
                    for e in tree.witness[v]:
                        rows.append(e)
                        cols.append(u)
                        vals.append(lam)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.graph.m, self.graph.n))


def unit_flow(routing: ObliviousRouting, u: int) -> Flow:
    if not 0 <= u < routing.graph.n:
        raise RoutingFailure(f"Target {u} is not a vertex.")
    flow = np.zeros(routing.graph.m)
    for tree, lam in zip(routing.trees, routing.weights):
        for v in tree.path_from_root(u):
            for e in tree.witness[v]:
                flow[e] += lam
    return flow


def routing_matrix(routing: ObliviousRouting) -> sp.csr_matrix:
    return routing.matrix


def _targets(routing: ObliviousRouting, b: DemandVector) -> DemandVector:
    g = routing.graph
    check_demand(g, b)
    targets = np.array(b, dtype=np.float64)
    targets[routing.source] = 0.0
    tol = DEFAULT_TOLERANCES.conservation * max(float(np.abs(b).sum()), 1.0)
    if targets.min(initial=0.0) < -tol:
        raise RoutingFailure(
            f"Demand is not sourced at {routing.source}: vertex "
            f"{int(np.argmin(targets))} has demand {float(targets.min())}."
        )
    return np.maximum(targets, 0.0)


def route(routing: ObliviousRouting, b: DemandVector) -> Flow:
    """Superpose the unit flows of every (source, v) pair, weighted by b_v."""
    flow: Flow = routing.matrix @ _targets(routing, b)
    return flow


def single_source_demands(n: int, s: int) -> List[DemandVector]:
    """Every unit pair demand out of s, then the uniform demand on all other vertices."""
    demands = [unit_demand(n, s, u) for u in range(n) if u != s]
    uniform = np.ones(n)
    uniform[s] = -(n - 1)
    demands.append(uniform)
    return demands


def competitive_ratio(routing: ObliviousRouting, demands: Sequence[DemandVector]) -> float:
    """Worst congestion(route(b)) / OPT_b over the given single-source demands."""
    g = routing.graph
    worst = -math.inf
    for b in demands:
        targets = _targets(routing, b)
        if not targets.any():
            continue
        opt = exact_min_congestion(g, b).value
        worst = max(worst, congestion(g, route(routing, b)) / opt)
    if math.isinf(worst):
        raise RoutingFailure("Competitive ratio needs at least one nonzero demand.")
    return worst


def worst_case_competitive_ratio(routing: ObliviousRouting) -> float:
    """
    The ratio over all demands out of the source, by one LP per edge e:
    maximize (route(b))_e / w_e over demands b routable with congestion 1.
    """
    g = routing.graph
    n, m, s = g.n, g.m, routing.source
    if n > MAX_EXACT_RATIO_VERTICES:
        raise RoutingFailure(
            f"Exact competitive ratio is limited to {MAX_EXACT_RATIO_VERTICES} vertices, graph has {n}."
        )
    # Bf = t - e_s * sum(t), with t >= 0 the demand at every target.
    source_row = sp.csr_matrix((np.ones(n), (np.full(n, s), np.arange(n))), shape=(n, n))
    a_eq = sp.hstack([incidence_matrix(g), -(sp.identity(n, format="csr") - source_row)]).tocsr()
    b_eq = np.zeros(n)
    bounds = [(0.0, float(w)) for w in g.weights] + [
        (0.0, 0.0) if v == s else (0.0, None) for v in range(n)
    ]
    matrix = routing.matrix
    worst = 0.0
    for e in range(m):
        row = matrix.getrow(e).toarray().ravel()
        if not row.any():
            continue
        objective = np.concatenate([np.zeros(m), -row / g.weights[e]])
        result = linprog(objective, A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs")
        if result.status != 0:
            raise RoutingFailure(f"Competitive ratio LP for edge {e} failed: {result.message}")
        worst = max(worst, -float(result.fun))
    return worst


def _candidate(args: Tuple[DirectedGraph, int, int, float]) -> Tuple[float, Arborescence]:
    g, s, seed, c = args
    tree = find_arborescence(g, s, make_rng(seed), c)
    return total_stretch(g, tree), tree


def find_routing(
    g: DirectedGraph,
    s: int,
    rng: np.random.Generator,
    c: float = 8.0,
    runs: Optional[int] = None,
    max_iterations: Optional[int] = None,
    parallel: Optional[int] = None,
) -> ObliviousRouting:
    """
    Multiplicative weights over arborescences: each round measures lengths
    p_e / (w_e * sum p), keeps the lowest-stretch arborescence of several runs,
    gives it weight min(1 / max_e load_e / w_e, what is left of 1), and raises
    p_e by exp(lambda * load_e / w_e).
    """
    if not 0 <= s < g.n:
        raise RoutingFailure(f"Source {s} is not a vertex.")
    n = g.n
    runs = runs if runs is not None else math.ceil(math.log2(max(n, 2))) + 1
    limit = max_iterations if max_iterations is not None else math.ceil(64 * math.log(max(n, 2)))
    log_p = np.zeros(g.m)
    trees: List[Arborescence] = []
    weights: List[float] = []
    total = 0.0
    while total < 1.0:
        if len(trees) >= limit:
            raise RoutingFailure(
                f"Routing did not converge in {limit} rounds; weights sum to {total}."
            )
        # Lengths only matter up to scale, so normalize by the largest p.
        lengths = np.exp(log_p - log_p.max()) / g.weights
        g_k = g.with_lengths(np.maximum(lengths, MIN_LENGTH))
        candidates = map_trials(
            _candidate, [(g_k, s, seed, c) for seed in spawn_seeds(rng, runs)], parallel
        )
        stretch, tree = min(candidates, key=lambda pair: pair[0])
        relative = edge_load(g, tree) / g.weights
        peak = float(relative.max(initial=0.0))
        remaining = 1.0 - total
        lam = remaining if peak == 0 else min(1.0 / peak, remaining)
        trees.append(tree)
        weights.append(lam)
        total = 1.0 if lam == remaining else total + lam
        log_p += lam * relative
        logger.debug(
            "routing round %d: stretch %g, peak load %g, weight %g",
            len(trees),
            stretch,
            peak,
            lam,
        )
    return ObliviousRouting(g, s, tuple(trees), tuple(weights))


def widest_arborescence(g: DirectedGraph, s: int, inward: bool = False) -> Arborescence:
    """
    The maximum-bottleneck arborescence from s: every vertex hangs off the
    path from s whose narrowest edge is widest. With inward=True it is built
    on the reversed graph, so its paths lead into s in g; edge indices are
    shared with g. A crude routing's congestion is set by the narrowest edge
    on each tree path, which this tree maximizes for every vertex at once; a
    maximum-weight spanning arborescence does not.
    """
    h = reverse(g) if inward else g
    n = h.n
    width = np.full(n, -math.inf)
    width[s] = math.inf
    parent = [-1] * n
    pred = [-1] * n
    done = [False] * n
    heap: List[Tuple[float, int]] = [(-math.inf, s)]
    while heap:
        _, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for e in h.out_edges[u]:
            v = int(h.heads[e])
            cand = min(float(width[u]), float(h.weights[e]))
            if not done[v] and cand > width[v]:
                width[v] = cand
                parent[v] = u
                pred[v] = e
                heapq.heappush(heap, (-cand, v))
    if not all(done):
        raise RoutingFailure(f"Not every vertex is reachable from {s}.")
    return Arborescence(
        s,
        tuple(parent),
        tuple(0.0 if v == s else float(h.lengths[pred[v]]) for v in range(n)),
        tuple(() if v == s else (pred[v],) for v in range(n)),
    )


def crude_routing(g: DirectedGraph, s: int) -> ObliviousRouting:
    return ObliviousRouting(g, s, (widest_arborescence(g, s),), (1.0,))


def route_residual(g: DirectedGraph, b: DemandVector, root: int = 0) -> Flow:
    """
    Route any zero-sum demand exactly: surpluses travel to the root along the
    widest in-arborescence, and the root feeds every deficit along the widest
    out-arborescence.
    """
    check_demand(g, b)
    inward = ObliviousRouting(reverse(g), root, (widest_arborescence(g, root, inward=True),), (1.0,))
    outward = crude_routing(g, root)
    sinks = np.maximum(b, 0.0)
    sources = np.maximum(-b, 0.0)
    sinks[root] = 0.0
    sources[root] = 0.0
    flow: Flow = outward.matrix @ sinks + inward.matrix @ sources
    return flow


def routing_to_json(routing: ObliviousRouting) -> Dict[str, Any]:
    return {
        "source": routing.source,
        "trees": [
            {
                "weight": lam,
                "parent": list(tree.parent),
                "witness": [list(path) for path in tree.witness],
            }
            for tree, lam in zip(routing.trees, routing.weights)
        ],
    }


def routing_from_json(g: DirectedGraph, data: Dict[str, Any]) -> ObliviousRouting:
    try:
        source = int(data["source"])
        trees: List[Arborescence] = []
        weights: List[float] = []
        for item in data["trees"]:
            witness = tuple(tuple(int(e) for e in path) for path in item["witness"])
            if any(not 0 <= e < g.m for path in witness for e in path):
                raise RoutingFailure("Routing refers to an edge the graph does not have.")
            tree = Arborescence(
                source,
                tuple(int(p) for p in item["parent"]),
                tuple(float(sum(g.lengths[e] for e in path)) for path in witness),
                witness,
            )
            tree.verify(g)
            trees.append(tree)
            weights.append(float(item["weight"]))
    except (KeyError, TypeError, ValueError) as e:
        raise RoutingFailure(f"Malformed routing file: {e}")
    return ObliviousRouting(g, source, tuple(trees), tuple(weights))
