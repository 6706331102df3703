from dataclasses import dataclass
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .error import RoutingFailure
from .graph import (
    Cut,
    DemandVector,
    DirectedGraph,
    Edge,
    Flow,
    check_flow,
    cut_weight,
    incidence_apply,
)
from .options import DEFAULT_TOLERANCES
from .oracles import exact_min_congestion

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BalanceCertificate:
    """
    Either a circulation whose per-edge congestions all lie in [1, alpha],
    proving bal(G) <= alpha, or a cut whose forward/backward weight ratio
    exceeds the threshold it was checked against.
    """

    alpha: float
    circulation: Optional[Flow] = None
    violating_cut: Optional[Cut] = None

    def verify(self, g: DirectedGraph) -> None:
        tol = DEFAULT_TOLERANCES
        if self.circulation is not None:
            f = self.circulation
            check_flow(g, f)
            residual = incidence_apply(g, f)
            if np.abs(residual).max(initial=0.0) > tol.conservation * max(float(f.sum()), 1.0):
                raise RoutingFailure("Balance certificate is not a circulation.")
            ratios = f / g.weights
            if ratios.min() < 1 - tol.certificate or ratios.max() > self.alpha * (1 + tol.certificate):
                raise RoutingFailure(
                    f"Circulation congestions span [{ratios.min()}, {ratios.max()}], "
                    f"not within [1, {self.alpha}]."
                )
        if self.violating_cut is not None:
            forward, backward = cut_weight(g, self.violating_cut)
            if forward / backward <= self.alpha:
                raise RoutingFailure(
                    f"Cut ratio {forward / backward} does not exceed {self.alpha}."
                )


def residual_degrees(g: DirectedGraph) -> DemandVector:
    """Weighted in-degree minus weighted out-degree."""
    return incidence_apply(g, np.array(g.weights))


def imbalance_exact(g: DirectedGraph) -> Tuple[float, BalanceCertificate]:
    """
    bal(G) = 1 + OPT_{-d}, where d are the residual degrees. Adding the weights
    to the optimal routing of -d gives a circulation with congestions in
    [1, bal(G)].
    """
    d = residual_degrees(g)
    result = exact_min_congestion(g, -d)
    bal = 1.0 + result.value
    circulation = np.array(g.weights) + result.flow
    # The routing may exceed the optimum by the bisection tolerance.
    alpha = max(bal, float((circulation / g.weights).max()))
    return bal, BalanceCertificate(alpha, circulation=circulation)


def undirectedize(g: DirectedGraph) -> DirectedGraph:
    """
    The undirected copy of g as a symmetric digraph. All edges between u and v,
    in either direction, merge into one pair (u, v), (v, u) carrying their total
    weight; the pair's length is the smallest merged length.
    """
    merged: Dict[Tuple[int, int], List[float]] = {}
    for e in g.edges:
        key = (min(e.tail, e.head), max(e.tail, e.head))
        if key in merged:
            merged[key][0] += e.weight
            merged[key][1] = min(merged[key][1], e.length)
        else:
            merged[key] = [e.weight, e.length]
    edges: List[Edge] = []
    for (u, v), (weight, length) in sorted(merged.items()):
        edges.append(Edge(u, v, weight, length))
        edges.append(Edge(v, u, weight, length))
    return DirectedGraph(g.n, tuple(edges), check_strongly_connected=False)


def residual_graph(
    g: DirectedGraph,
    f: Flow,
    capacities: Optional[Sequence[float]] = None,
    check_strongly_connected: bool = True,
) -> DirectedGraph:
    """
    Residual digraph of f: each edge keeps forward capacity c - f and gains a
    backward edge of capacity f. Zero-capacity edges are dropped.
    """
    check_flow(g, f)
    caps = np.array(g.weights if capacities is None else capacities, dtype=np.float64)
    tol = DEFAULT_TOLERANCES.conservation * max(float(caps.max(initial=0.0)), 1.0)
    if f.min(initial=0.0) < -tol or np.any(f > caps + tol):
        raise RoutingFailure("Flow is not feasible for the given capacities.")
    edges: List[Edge] = []
    for e, c, x in zip(g.edges, caps, f):
        forward = float(c - x)
        if forward > tol:
            edges.append(Edge(e.tail, e.head, forward, e.length))
        if x > tol:
            edges.append(Edge(e.head, e.tail, float(x), e.length))
    return DirectedGraph(g.n, tuple(edges), check_strongly_connected=check_strongly_connected)


def additive_imbalance(g: DirectedGraph) -> float:
    """
    Least total weight of added edges making g Eulerian: the total deficit of
    vertices whose out-weight exceeds their in-weight. Strong connectivity is
    not needed.
    """
    d = residual_degrees(g)
    return float(np.maximum(-d, 0.0).sum())
