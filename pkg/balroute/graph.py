"""
Directed graphs with positive weights and lengths, and the incidence algebra
shared by every solver in the package.

Per-edge vectors (flows, lengths, loads) are numpy arrays aligned to the
graph's edge list; per-vertex vectors (demands, potentials, distances) are
aligned to vertex indices 0..n-1. For a flow f, the demand it routes is
b = Bf with b_v = (flow into v) - (flow out of v).
"""
from dataclasses import InitVar, dataclass, field
import heapq
import math
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .error import RoutingFailure
from .options import DEFAULT_TOLERANCES

Vector = NDArray[np.float64]
Flow = Vector
DemandVector = Vector


@dataclass(frozen=True)
class Edge:
    tail: int
    head: int
    weight: float
    length: float = 1.0


@dataclass(frozen=True, eq=False)
class DirectedGraph:
    vertex_count: int
    edges: Tuple[Edge, ...]
    check_strongly_connected: InitVar[bool] = True

    tails: NDArray[np.int64] = field(init=False, repr=False)
    heads: NDArray[np.int64] = field(init=False, repr=False)
    weights: Vector = field(init=False, repr=False)
    lengths: Vector = field(init=False, repr=False)
    out_edges: Tuple[Tuple[int, ...], ...] = field(init=False, repr=False)
    in_edges: Tuple[Tuple[int, ...], ...] = field(init=False, repr=False)

    def __post_init__(self, check_strongly_connected: bool) -> None:
        n = self.vertex_count
        if n < 1:
            raise RoutingFailure("A graph needs at least one vertex.")
        edges = tuple(self.edges)
        object.__setattr__(self, "edges", edges)
        out_edges: List[List[int]] = [[] for _ in range(n)]
        in_edges: List[List[int]] = [[] for _ in range(n)]
        for i, e in enumerate(edges):
            if not (0 <= e.tail < n and 0 <= e.head < n):
                raise RoutingFailure(f"Edge {i} ({e.tail}, {e.head}) has an endpoint outside 0..{n - 1}.")
            if e.tail == e.head:
                raise RoutingFailure(f"Edge {i} is a self-loop at vertex {e.tail}.")
            if not (0 < e.weight < math.inf) or not (0 < e.length < math.inf):
                raise RoutingFailure(
                    f"Edge {i} ({e.tail}, {e.head}) needs a finite positive weight and length, "
                    f"got weight {e.weight} and length {e.length}."
                )
            out_edges[e.tail].append(i)
            in_edges[e.head].append(i)

        def frozen(values: Iterable[float], dtype: type) -> "NDArray[Any]":
            arr = np.fromiter(values, dtype=dtype, count=len(edges))
            arr.setflags(write=False)
            return arr

        object.__setattr__(self, "tails", frozen((e.tail for e in edges), np.int64))
        object.__setattr__(self, "heads", frozen((e.head for e in edges), np.int64))
        object.__setattr__(self, "weights", frozen((e.weight for e in edges), np.float64))
        object.__setattr__(self, "lengths", frozen((e.length for e in edges), np.float64))
        object.__setattr__(self, "out_edges", tuple(tuple(x) for x in out_edges))
        object.__setattr__(self, "in_edges", tuple(tuple(x) for x in in_edges))

        if check_strongly_connected and not self.is_strongly_connected():
            raise RoutingFailure("Graph is not strongly connected.")

    @property
    def n(self) -> int:
        return self.vertex_count

    @property
    def m(self) -> int:
        return len(self.edges)

    def adjacency(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (np.ones(self.m), (self.tails, self.heads)),
            shape=(self.n, self.n),
        )

    def is_strongly_connected(self) -> bool:
        if self.n == 1:
            return True
        adj = self.adjacency()
        forward = breadth_first_order(adj, 0, directed=True, return_predecessors=False)
        if len(forward) != self.n:
            return False
        backward = breadth_first_order(
            adj.transpose().tocsr(), 0, directed=True, return_predecessors=False
        )
        return len(backward) == self.n

    def with_lengths(self, lengths: Sequence[float]) -> "DirectedGraph":
        if len(lengths) != self.m:
            raise RoutingFailure(f"Expected {self.m} lengths, got {len(lengths)}.")
        return DirectedGraph(
            self.n,
            tuple(Edge(e.tail, e.head, e.weight, float(l)) for e, l in zip(self.edges, lengths)),
            check_strongly_connected=False,
        )

    def with_weights(self, weights: Sequence[float]) -> "DirectedGraph":
        if len(weights) != self.m:
            raise RoutingFailure(f"Expected {self.m} weights, got {len(weights)}.")
        return DirectedGraph(
            self.n,
            tuple(Edge(e.tail, e.head, float(w), e.length) for e, w in zip(self.edges, weights)),
            check_strongly_connected=False,
        )


@dataclass(frozen=True)
class Cut:
    members: FrozenSet[int]

    @staticmethod
    def of(g: DirectedGraph, vertices: Iterable[int]) -> "Cut":
        members = frozenset(int(v) for v in vertices)
        if not members or len(members) >= g.n or not all(0 <= v < g.n for v in members):
            raise RoutingFailure(
                f"A cut must be a proper nonempty vertex subset, got {sorted(members)}."
            )
        return Cut(members)

    def mask(self, n: int) -> NDArray[np.bool_]:
        mask = np.zeros(n, dtype=bool)
        mask[list(self.members)] = True
        return mask

    def complement(self, n: int) -> "Cut":
        return Cut(frozenset(range(n)) - self.members)

    def __len__(self) -> int:
        return len(self.members)


def check_flow(g: DirectedGraph, f: Flow) -> None:
    if f.shape != (g.m,):
        raise RoutingFailure(f"Flow has shape {f.shape}, expected ({g.m},).")


def check_demand(g: DirectedGraph, b: DemandVector) -> None:
    if b.shape != (g.n,):
        raise RoutingFailure(f"Demand has shape {b.shape}, expected ({g.n},).")
    scale = max(float(np.abs(b).sum()), 1.0)
    if abs(float(b.sum())) > DEFAULT_TOLERANCES.conservation * scale:
        raise RoutingFailure(f"Demand entries sum to {float(b.sum())}, not zero.")


def unit_demand(n: int, source: int, sink: int, amount: float = 1.0) -> DemandVector:
    b = np.zeros(n)
    b[source] -= amount
    b[sink] += amount
    return b


def incidence_apply(g: DirectedGraph, f: Flow) -> DemandVector:
    check_flow(g, f)
    inflow = np.bincount(g.heads, weights=f, minlength=g.n)
    outflow = np.bincount(g.tails, weights=f, minlength=g.n)
    result: DemandVector = inflow - outflow
    return result


def incidence_matrix(g: DirectedGraph) -> sp.csr_matrix:
    """The n x m matrix B, -1 at an edge's tail and +1 at its head."""
    cols = np.arange(g.m)
    return sp.csr_matrix(
        (
            np.concatenate([np.full(g.m, -1.0), np.ones(g.m)]),
            (np.concatenate([g.tails, g.heads]), np.concatenate([cols, cols])),
        ),
        shape=(g.n, g.m),
    )


def incidence_transpose(g: DirectedGraph, v: Vector) -> Vector:
    """B^T v: potential difference head minus tail, per edge."""
    result: Vector = v[g.heads] - v[g.tails]
    return result


def congestion(g: DirectedGraph, f: Flow) -> float:
    check_flow(g, f)
    if g.m == 0:
        return 0.0
    return float(np.max(f / g.weights))


def cut_weight(g: DirectedGraph, cut: Cut) -> Tuple[float, float]:
    """(w(S, V - S), w(V - S, S))"""
    inside = cut.mask(g.n)
    tail_in = inside[g.tails]
    head_in = inside[g.heads]
    forward = float(g.weights[tail_in & ~head_in].sum())
    backward = float(g.weights[~tail_in & head_in].sum())
    return forward, backward


def volume(g: DirectedGraph) -> float:
    return float(np.dot(g.weights, g.lengths))


def reverse(g: DirectedGraph) -> DirectedGraph:
    return DirectedGraph(
        g.n,
        tuple(Edge(e.head, e.tail, e.weight, e.length) for e in g.edges),
        check_strongly_connected=False,
    )


def union(first: DirectedGraph, second: DirectedGraph) -> DirectedGraph:
    """Edge-list union on the same vertex set; edges of `first` come first."""
    if first.n != second.n:
        raise RoutingFailure("Cannot merge graphs on different vertex sets.")
    return DirectedGraph(first.n, first.edges + second.edges, check_strongly_connected=False)


@dataclass(frozen=True)
class Subgraph:
    graph: DirectedGraph
    # vertices[i] is the original index of local vertex i
    vertices: Tuple[int, ...]
    # edge_ids[j] is the original index of local edge j
    edge_ids: Tuple[int, ...]
    local_index: Dict[int, int]


def induced_subgraph(g: DirectedGraph, vertices: Iterable[int]) -> Subgraph:
    """The subgraph induced by `vertices`; it need not be strongly connected."""
    verts = tuple(sorted(set(vertices)))
    local = {v: i for i, v in enumerate(verts)}
    edges: List[Edge] = []
    edge_ids: List[int] = []
    for i, e in enumerate(g.edges):
        if e.tail in local and e.head in local:
            edges.append(Edge(local[e.tail], local[e.head], e.weight, e.length))
            edge_ids.append(i)
    sub = DirectedGraph(len(verts), tuple(edges), check_strongly_connected=False)
    return Subgraph(sub, verts, tuple(edge_ids), local)


def strongly_connected_components(
    g: DirectedGraph, edge_mask: Optional[NDArray[np.bool_]] = None
) -> Tuple[int, NDArray[np.int32]]:
    """Label vertices by the strong components of the subgraph of masked edges."""
    mask = np.ones(g.m, dtype=bool) if edge_mask is None else edge_mask
    adj = sp.csr_matrix(
        (np.ones(int(mask.sum())), (g.tails[mask], g.heads[mask])),
        shape=(g.n, g.n),
    )
    count, labels = connected_components(adj, directed=True, connection="strong")
    return int(count), labels


@dataclass(frozen=True)
class ShortestPaths:
    source: int
    dist: Vector
    pred_edge: NDArray[np.int64]
    tail_of: Tuple[int, ...]

    def path_to(self, v: int) -> List[int]:
        """Edge indices of the recorded shortest path from the source to v."""
        if math.isinf(self.dist[v]):
            raise RoutingFailure(f"Vertex {v} is unreachable from {self.source}.")
        path: List[int] = []
        while v != self.source:
            e = int(self.pred_edge[v])
            path.append(e)
            v = self.tail_of[e]
        path.reverse()
        return path


@dataclass(frozen=True)
class MultiSourcePaths:
    key: Vector
    owner: NDArray[np.int64]
    pred_edge: NDArray[np.int64]


def multi_source_paths(g: DirectedGraph, keys: Vector) -> MultiSourcePaths:
    """
    One Dijkstra sweep started from every vertex v with finite keys[v].

    Each vertex u receives the label min over sources v of (keys[v] + d(v, u), v),
    compared lexicographically, so ties go to the smaller source index. Labels
    propagate along predecessor edges, hence every vertex on the recorded path
    from an owner to u has the same owner.
    """
    n = g.n
    key = np.array(keys, dtype=np.float64)
    owner = np.full(n, -1, dtype=np.int64)
    pred = np.full(n, -1, dtype=np.int64)
    heap: List[Tuple[float, int, int]] = []
    for v in range(n):
        if not math.isinf(key[v]):
            owner[v] = v
            heap.append((float(key[v]), v, v))
    heapq.heapify(heap)
    done = np.zeros(n, dtype=bool)
    lengths = g.lengths
    heads = g.heads
    while heap:
        k, root, u = heapq.heappop(heap)
        if done[u] or k != key[u] or root != owner[u]:
            continue
        done[u] = True
        for e in g.out_edges[u]:
            v = int(heads[e])
            if done[v]:
                continue
            cand = k + float(lengths[e])
            if cand < key[v] or (cand == key[v] and root < owner[v]):
                key[v] = cand
                owner[v] = root
                pred[v] = e
                heapq.heappush(heap, (cand, root, v))
    return MultiSourcePaths(key, owner, pred)


def shortest_paths(g: DirectedGraph, source: int) -> ShortestPaths:
    """Distances from `source`; unreachable vertices get inf."""
    if not 0 <= source < g.n:
        raise RoutingFailure(f"Source {source} is not a vertex.")
    keys = np.full(g.n, math.inf)
    keys[source] = 0.0
    sweep = multi_source_paths(g, keys)
    return ShortestPaths(source, sweep.key, sweep.pred_edge, tuple(int(t) for t in g.tails))


def shortest_dist(g: DirectedGraph, source: int) -> Vector:
    sp_tree = shortest_paths(g, source)
    unreachable = np.flatnonzero(np.isinf(sp_tree.dist))
    if len(unreachable):
        raise RoutingFailure(
            f"Vertices {unreachable.tolist()} are unreachable from {source}."
        )
    return sp_tree.dist


def cut_ratio(demand_inside: float, inflow: float) -> float:
    if inflow > 0:
        return demand_inside / inflow
    if demand_inside > 0:
        return math.inf
    return -math.inf if demand_inside < 0 else 0.0


@dataclass(frozen=True)
class ThresholdCut:
    cut: Cut
    ratio: float


def threshold_cut(g: DirectedGraph, potentials: Vector, b: DemandVector) -> ThresholdCut:
    """
    Among the threshold cuts S = {v : potentials[v] >= theta}, find the one
    maximizing b_S / w(V - S, S).

    The denominator counts edges entering S: those are the edges that any flow
    routing b must use to deliver b_S into S, and the edges with positive
    potential difference B^T v. With that orientation, the best threshold cut
    has ratio at least b^T v whenever ||C max(B^T v, 0)||_1 <= 1.
    """
    n = g.n
    if n < 2:
        raise RoutingFailure("A graph with one vertex has no cuts.")
    order = np.argsort(-potentials, kind="stable")
    pos = np.empty(n, dtype=np.int64)
    pos[order] = np.arange(n)
    # S_k = first k vertices of `order`; edge (t, h) enters S_k iff pos[h] < k <= pos[t].
    delta = np.zeros(n + 1)
    entering = pos[g.heads] < pos[g.tails]
    np.add.at(delta, pos[g.heads][entering] + 1, g.weights[entering])
    np.add.at(delta, pos[g.tails][entering] + 1, -g.weights[entering])
    inflow = np.cumsum(delta)
    demand_prefix = np.cumsum(b[order])

    sorted_pot = potentials[order]
    candidates = [k for k in range(1, n) if sorted_pot[k - 1] > sorted_pot[k]]
    best: Optional[ThresholdCut] = None
    for k in candidates:
        ratio = cut_ratio(float(demand_prefix[k - 1]), float(inflow[k]))
        if best is None or ratio > best.ratio:
            best = ThresholdCut(Cut(frozenset(int(v) for v in order[:k])), ratio)
    if best is not None:
        return best

    # Constant potentials: fall back to the singleton sweep.
    for v in range(n):
        cut = Cut(frozenset([v]))
        _, backward = cut_weight(g, cut)
        ratio = cut_ratio(float(b[v]), backward)
        if best is None or ratio > best.ratio:
            best = ThresholdCut(cut, ratio)
    assert best is not None
    return best


def flow_decomposition(
    g: DirectedGraph, f: Flow, tolerance: float = 1e-12
) -> List[Tuple[int, int, float]]:
    """
    Split a flow into (source, sink, amount) path flows, cancelling any cycles
    met along the way. Amounts below `tolerance` times the flow's scale are
    dropped.
    """
    check_flow(g, f)
    remaining = np.array(f, dtype=np.float64)
    b = incidence_apply(g, remaining)
    scale = max(float(np.abs(remaining).max(initial=0.0)), 1.0) * tolerance
    supply = np.maximum(-b, 0.0)
    demand = np.maximum(b, 0.0)
    result: Dict[Tuple[int, int], float] = {}

    for start in range(g.n):
        while supply[start] > scale:
            path: List[int] = []
            seen = {start: 0}
            v = start
            while demand[v] <= scale or v == start:
                out = [e for e in g.out_edges[v] if remaining[e] > scale]
                if not out:
                    break
                e = max(out, key=lambda x: remaining[x])
                path.append(e)
                v = int(g.heads[e])
                if v in seen:
                    # Cancel the cycle and resume from where it started.
                    cycle = path[seen[v] :]
                    amount = min(remaining[c] for c in cycle)
                    for c in cycle:
                        remaining[c] -= amount
                    del path[seen[v] :]
                    seen = {k: i for k, i in seen.items() if i <= seen[v]}
                    continue
                seen[v] = len(path)
            if demand[v] <= scale or not path:
                # Only rounding residue is left at this vertex.
                supply[start] = 0.0
                break
            amount = min(supply[start], demand[v], min(remaining[e] for e in path))
            for e in path:
                remaining[e] -= amount
            supply[start] -= amount
            demand[v] -= amount
            key = (start, v)
            result[key] = result.get(key, 0.0) + float(amount)
    return [(s, t, a) for (s, t), a in sorted(result.items())]
