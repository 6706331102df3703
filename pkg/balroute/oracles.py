"""
Exact reference solvers: augmenting-path max flow, minimum congestion routing
of a single-commodity demand, cut enumeration, and a multicommodity LP.

These are the ground truth for the approximate solvers and for tests. None of
them tries to be fast beyond what small instances need.
"""
from collections import deque
from dataclasses import dataclass
import logging
import math
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
import scipy.sparse as sp
from scipy.optimize import linprog

from .approximator import CongestionApproximator
from .error import RoutingFailure
from .graph import (
    Cut,
    DemandVector,
    DirectedGraph,
    Flow,
    check_demand,
    cut_ratio,
    incidence_matrix,
)

logger = logging.getLogger(__name__)

MAX_ENUMERATION_VERTICES = 20
ENUMERATION_CHUNK = 1 << 14


class FlowNetwork:
    """Residual network for Edmonds-Karp with float capacities."""

    def __init__(self, vertex_count: int) -> None:
        self.vertex_count = vertex_count
        self.head: List[int] = []
        self.residual: List[float] = []
        self.capacity: List[float] = []
        self.adjacent: List[List[int]] = [[] for _ in range(vertex_count)]

    def add_arc(self, u: int, v: int, capacity: float) -> int:
        """Add u -> v with its reverse residual arc; returns the forward arc id."""
        arc = len(self.head)
        self.head += [v, u]
        self.residual += [capacity, 0.0]
        self.capacity += [capacity, 0.0]
        self.adjacent[u].append(arc)
        self.adjacent[v].append(arc + 1)
        return arc

    def flow_on(self, arc: int) -> float:
        return min(max(self.capacity[arc] - self.residual[arc], 0.0), self.capacity[arc])

    def _tolerance(self) -> float:
        return 1e-12 * max(self.capacity, default=1.0)

    def max_flow(self, source: int, sink: int) -> float:
        tol = self._tolerance()
        total = 0.0
        while True:
            parent_arc = [-1] * self.vertex_count
            visited = [False] * self.vertex_count
            visited[source] = True
            queue = deque([source])
            while queue and not visited[sink]:
                u = queue.popleft()
                for arc in self.adjacent[u]:
                    v = self.head[arc]
                    if not visited[v] and self.residual[arc] > tol:
                        visited[v] = True
                        parent_arc[v] = arc
                        queue.append(v)
            if not visited[sink]:
                return total

            bottleneck = math.inf
            v = sink
            while v != source:
                arc = parent_arc[v]
                bottleneck = min(bottleneck, self.residual[arc])
                v = self.head[arc ^ 1]
            v = sink
            while v != source:
                arc = parent_arc[v]
                self.residual[arc] -= bottleneck
                self.residual[arc ^ 1] += bottleneck
                v = self.head[arc ^ 1]
            total += bottleneck

    def reachable_from(self, source: int) -> List[bool]:
        tol = self._tolerance()
        visited = [False] * self.vertex_count
        visited[source] = True
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for arc in self.adjacent[u]:
                v = self.head[arc]
                if not visited[v] and self.residual[arc] > tol:
                    visited[v] = True
                    queue.append(v)
        return visited


def exact_max_flow(
    g: DirectedGraph,
    source: int,
    sink: int,
    capacities: Optional[Sequence[float]] = None,
) -> Tuple[float, Flow, Cut]:
    """Maximum s-t flow with capacities w (or `capacities`) and a minimum cut."""
    if source == sink:
        raise RoutingFailure("Source and sink must differ.")
    caps = g.weights if capacities is None else capacities
    network = FlowNetwork(g.n)
    arcs = [network.add_arc(e.tail, e.head, float(c)) for e, c in zip(g.edges, caps)]
    value = network.max_flow(source, sink)
    flow = np.array([network.flow_on(a) for a in arcs])
    reached = network.reachable_from(source)
    cut = Cut(frozenset(v for v in range(g.n) if reached[v]))
    return value, flow, cut


@dataclass(frozen=True)
class MinCongestionResult:
    value: float
    flow: Flow
    # None only for the zero demand, which every flow routes.
    cut: Optional[Cut]
    cut_ratio: float


def _demand_cut_ratio(g: DirectedGraph, b: DemandVector, cut: Cut) -> float:
    inside = cut.mask(g.n)
    inflow = float(g.weights[~inside[g.tails] & inside[g.heads]].sum())
    return cut_ratio(float(b[inside].sum()), inflow)


def _route_with_capacity_scale(
    g: DirectedGraph, b: DemandVector, scale: float
) -> Tuple[bool, Flow, Optional[Cut]]:
    """
    Check whether b can be routed with capacities scale * w. On failure, the
    vertices left unreachable from the super source form a cut S with
    b_S > scale * w(V - S, S).
    """
    n = g.n
    super_source, super_sink = n, n + 1
    network = FlowNetwork(n + 2)
    arcs = [network.add_arc(e.tail, e.head, scale * e.weight) for e in g.edges]
    required = 0.0
    for v in range(n):
        if b[v] < 0:
            network.add_arc(super_source, v, float(-b[v]))
        elif b[v] > 0:
            network.add_arc(v, super_sink, float(b[v]))
            required += float(b[v])
    value = network.max_flow(super_source, super_sink)
    flow = np.array([network.flow_on(a) for a in arcs])
    if value >= required * (1 - 1e-10):
        return True, flow, None
    reached = network.reachable_from(super_source)
    unreached = [v for v in range(n) if not reached[v]]
    if not unreached or len(unreached) == n:
        return False, flow, None
    return False, flow, Cut(frozenset(unreached))


def exact_min_congestion(g: DirectedGraph, b: DemandVector) -> MinCongestionResult:
    """
    Minimum congestion routing of b, with a cut S attaining
    b_S / w(V - S, S) = OPT_b.

    The lower end of the bracket always is the ratio of the best cut seen so
    far, which is a valid lower bound. Every failed feasibility check at the
    lower end yields a strictly better cut, so the search usually finishes in a
    handful of max-flow calls; if the cut updates stall numerically it
    continues as a plain bisection.
    """
    check_demand(g, b)
    scale = float(np.abs(b).max(initial=0.0))
    if scale == 0.0:
        return MinCongestionResult(0.0, np.zeros(g.m), None, 0.0)

    w_in = np.bincount(g.heads, weights=g.weights, minlength=g.n)
    w_out = np.bincount(g.tails, weights=g.weights, minlength=g.n)
    best_cut: Optional[Cut] = None
    lo = -math.inf
    for v in range(g.n):
        for cut, ratio in (
            (Cut(frozenset([v])), cut_ratio(float(b[v]), float(w_in[v]))),
            (Cut(frozenset([v])).complement(g.n), cut_ratio(float(-b[v]), float(w_out[v]))),
        ):
            if ratio > lo:
                lo, best_cut = ratio, cut
    if math.isinf(lo):
        raise RoutingFailure("Demand is not routable: some cut has no entering edges.")
    hi = float(np.abs(b).sum()) / float(g.weights.min())
    hi = max(hi, lo)

    best_flow: Optional[Flow] = None
    best_flow_scale = math.inf
    for _ in range(200):
        target = lo * (1 + 1e-10)
        feasible, flow, cut = _route_with_capacity_scale(g, b, target)
        if feasible:
            best_flow, best_flow_scale = flow, target
            break
        if cut is not None:
            ratio = _demand_cut_ratio(g, b, cut)
            if math.isinf(ratio):
                raise RoutingFailure("Demand is not routable: some cut has no entering edges.")
            if ratio > lo * (1 + 1e-12):
                lo, best_cut = ratio, cut
                continue
        # Cut updates stalled; bisect the remaining bracket.
        while hi > lo * (1 + 1e-9):
            mid = (lo + hi) / 2
            feasible, flow, cut = _route_with_capacity_scale(g, b, mid)
            if feasible:
                hi = mid
                if mid < best_flow_scale:
                    best_flow, best_flow_scale = flow, mid
            else:
                ratio = _demand_cut_ratio(g, b, cut) if cut is not None else -math.inf
                if ratio > lo:
                    lo, best_cut = min(ratio, hi), cut
                else:
                    lo = mid
        if best_flow is None:
            feasible, best_flow, _ = _route_with_capacity_scale(g, b, hi)
            if not feasible:
                raise RoutingFailure("Min-congestion bisection failed to find a feasible routing.")
        break
    else:
        raise RoutingFailure("Min-congestion search did not converge.")

    assert best_flow is not None and best_cut is not None
    logger.debug("exact min congestion %g via cut of size %d", lo, len(best_cut))
    return MinCongestionResult(lo, best_flow, best_cut, _demand_cut_ratio(g, b, best_cut))


@dataclass(frozen=True)
class CutBlock:
    """A chunk of enumerated cuts: membership rows plus crossing weights."""

    members: NDArray[np.bool_]
    forward: NDArray[np.float64]
    backward: NDArray[np.float64]


def enumerate_cuts(g: DirectedGraph) -> Iterator[CutBlock]:
    """All 2^n - 2 proper nonempty cuts, in increasing bitmask order."""
    n = g.n
    if n > MAX_ENUMERATION_VERTICES:
        raise RoutingFailure(
            f"Cut enumeration is limited to {MAX_ENUMERATION_VERTICES} vertices, graph has {n}."
        )
    if n < 2:
        return
    bits = np.arange(n, dtype=np.int64)
    last = (1 << n) - 1
    for start in range(1, last, ENUMERATION_CHUNK):
        masks = np.arange(start, min(start + ENUMERATION_CHUNK, last), dtype=np.int64)
        members = ((masks[:, None] >> bits) & 1).astype(bool)
        tail_in = members[:, g.tails]
        head_in = members[:, g.heads]
        forward = (tail_in & ~head_in).astype(np.float64) @ g.weights
        backward = (~tail_in & head_in).astype(np.float64) @ g.weights
        yield CutBlock(members, forward, backward)


def _cut_from_row(row: NDArray[np.bool_]) -> Cut:
    return Cut(frozenset(int(v) for v in np.flatnonzero(row)))


def brute_force_min_congestion(g: DirectedGraph, b: DemandVector) -> Tuple[float, Cut]:
    """max over cuts of b_S / w(V - S, S)"""
    check_demand(g, b)
    best = -math.inf
    best_cut: Optional[Cut] = None
    for block in enumerate_cuts(g):
        inside = block.members.astype(np.float64) @ b
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(
                block.backward > 0,
                inside / block.backward,
                np.where(inside > 0, math.inf, -math.inf),
            )
        i = int(np.argmax(ratios))
        if ratios[i] > best:
            best, best_cut = float(ratios[i]), _cut_from_row(block.members[i])
    assert best_cut is not None
    return max(best, 0.0), best_cut


def brute_force_imbalance(g: DirectedGraph) -> Tuple[float, Cut]:
    """max over cuts of w(S, V - S) / w(V - S, S)"""
    best = -math.inf
    best_cut: Optional[Cut] = None
    for block in enumerate_cuts(g):
        ratios = block.forward / block.backward
        i = int(np.argmax(ratios))
        if ratios[i] > best:
            best, best_cut = float(ratios[i]), _cut_from_row(block.members[i])
    if best_cut is None:
        raise RoutingFailure("A graph with one vertex has no cuts.")
    return best, best_cut


def brute_force_sparsest_cut(g: DirectedGraph) -> Tuple[float, Cut]:
    """min over cuts of w(S, V - S) / (|S| |V - S|)"""
    best = math.inf
    best_cut: Optional[Cut] = None
    for block in enumerate_cuts(g):
        sizes = block.members.sum(axis=1)
        ratios = block.forward / (sizes * (g.n - sizes))
        i = int(np.argmin(ratios))
        if ratios[i] < best:
            best, best_cut = float(ratios[i]), _cut_from_row(block.members[i])
    if best_cut is None:
        raise RoutingFailure("A graph with one vertex has no cuts.")
    return best, best_cut


def all_cuts_congestion_approximator(g: DirectedGraph) -> CongestionApproximator:
    """
    One row per proper cut S: the indicator of S divided by
    max(w(S, V - S), w(V - S, S)).

    A single linear row cannot be exact for both b and -b unless the cut is
    balanced, so the larger crossing weight is used: then ||Rb||_inf never
    exceeds OPT_b, and OPT_b <= bal(G) * ||Rb||_inf. The quality is therefore
    bal(G), which is 1 exactly on Eulerian graphs.
    """
    rows: List[sp.csr_matrix] = []
    quality = 1.0
    for block in enumerate_cuts(g):
        scale = 1.0 / np.maximum(block.forward, block.backward)
        rows.append(sp.csr_matrix(block.members.astype(np.float64) * scale[:, None]))
        quality = max(quality, float(np.max(block.forward / block.backward)))
    matrix = sp.vstack(rows).tocsr() if rows else sp.csr_matrix((0, g.n))
    return CongestionApproximator(matrix, quality, "all-cuts")


def optimal_multicommodity_congestion(
    g: DirectedGraph, demand_pairs: Sequence[Tuple[int, int, float]]
) -> float:
    """
    Minimum congestion routing all (source, sink, amount) pairs at once, as an
    LP. Pairs that share a source are merged into one commodity, which does not
    change the optimum.
    """
    by_source: Dict[int, DemandVector] = {}
    for s, t, amount in demand_pairs:
        if s == t or amount < 0:
            raise RoutingFailure(f"Invalid demand pair ({s}, {t}, {amount}).")
        b = by_source.setdefault(s, np.zeros(g.n))
        b[s] -= amount
        b[t] += amount
    if not by_source:
        return 0.0

    k = len(by_source)
    m = g.m
    incidence = incidence_matrix(g)
    a_eq = sp.hstack(
        [sp.block_diag([incidence] * k, format="csr"), sp.csr_matrix((g.n * k, 1))]
    ).tocsr()
    b_eq = np.concatenate(list(by_source.values()))
    a_ub = sp.hstack(
        [sp.hstack([sp.identity(m, format="csr")] * k), sp.csr_matrix(-g.weights.reshape(-1, 1))]
    ).tocsr()
    b_ub = np.zeros(m)
    objective = np.zeros(m * k + 1)
    objective[-1] = 1.0
    result = linprog(
        objective, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs"
    )
    if result.status != 0:
        raise RoutingFailure(f"Multicommodity LP failed: {result.message}")
    return float(result.x[-1])
