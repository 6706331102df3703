"""
Low-stretch arborescences: collapse short strongly connected pieces, carve
the graph with the rooted decomposition, recurse inside every cluster from its
center, and hang the centers off the root by shortest paths.
"""
from collections import deque
from dataclasses import dataclass, field
import logging
import math
from typing import Dict, List, Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from .decomposition import cluster_directed_rooted
from .error import RoutingFailure
from .graph import (
    DirectedGraph,
    Edge,
    Vector,
    induced_subgraph,
    shortest_dist,
    shortest_paths,
    strongly_connected_components,
    volume,
)
from .trials import spawn

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CollapsedGraph:
    graph: DirectedGraph
    # supervertex of every original vertex
    component: NDArray[np.int32]
    members: Tuple[Tuple[int, ...], ...]
    # original edge index of every quotient edge
    edge_origin: Tuple[int, ...]
    x_left: float
    x_right: float

    def volume_bound(self, original: DirectedGraph) -> float:
        """2 * sum over edges longer than x_L / n of w(e) * min(l(e), x_R)"""
        long_edges = original.lengths > self.x_left / original.n
        capped = np.minimum(original.lengths[long_edges], self.x_right)
        return 2.0 * float(np.dot(original.weights[long_edges], capped))


def collapse(g: DirectedGraph, x_left: float, x_right: float) -> CollapsedGraph:
    """
    Merge vertices that reach each other through arcs of length at most x_L,
    drop arcs inside a merged vertex, and cap the remaining lengths at x_R.
    """
    if not 0 < x_left < x_right:
        raise RoutingFailure(f"Collapse needs 0 < x_L < x_R, got [{x_left}, {x_right}].")
    count, labels = strongly_connected_components(g, g.lengths <= x_left)
    members: List[List[int]] = [[] for _ in range(count)]
    for v, label in enumerate(labels):
        members[label].append(v)
    edges: List[Edge] = []
    origin: List[int] = []
    for i, e in enumerate(g.edges):
        a, b = int(labels[e.tail]), int(labels[e.head])
        if a != b:
            edges.append(Edge(a, b, e.weight, min(e.length, x_right)))
            origin.append(i)
    quotient = DirectedGraph(count, tuple(edges), check_strongly_connected=False)
    return CollapsedGraph(
        quotient,
        labels,
        tuple(tuple(m) for m in members),
        tuple(origin),
        x_left,
        x_right,
    )


@dataclass(frozen=True)
class Arborescence:
    root: int
    # parent[v] is -1 for the root
    parent: Tuple[int, ...]
    # length of the arc (parent[v], v); 0 for the root
    arc_length: Tuple[float, ...]
    # edge indices of a path in G from parent[v] to v of length arc_length[v]
    witness: Tuple[Tuple[int, ...], ...]

    order: Tuple[int, ...] = field(init=False, repr=False, compare=False)
    depth: Vector = field(init=False, repr=False, compare=False)
    level: NDArray[np.int64] = field(init=False, repr=False, compare=False)
    ancestors: List[List[int]] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        n = len(self.parent)
        children: List[List[int]] = [[] for _ in range(n)]
        for v, p in enumerate(self.parent):
            if v == self.root:
                if p != -1:
                    raise RoutingFailure("The root of an arborescence has a parent.")
            elif not 0 <= p < n:
                raise RoutingFailure(f"Vertex {v} has no parent in the arborescence.")
            else:
                children[p].append(v)
        order = [self.root]
        queue = deque([self.root])
        depth = np.zeros(n)
        level = np.zeros(n, dtype=np.int64)
        while queue:
            u = queue.popleft()
            for v in children[u]:
                depth[v] = depth[u] + self.arc_length[v]
                level[v] = level[u] + 1
                order.append(v)
                queue.append(v)
        if len(order) != n:
            raise RoutingFailure("Arborescence does not reach every vertex from its root.")
        # Binary lifting table for lowest common ancestors.
        ancestors = [[p if p >= 0 else self.root for p in self.parent]]
        for _ in range(max(int(level.max(initial=0)), 1).bit_length()):
            prev = ancestors[-1]
            ancestors.append([prev[prev[v]] for v in range(n)])
        object.__setattr__(self, "order", tuple(order))
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "level", level)
        object.__setattr__(self, "ancestors", ancestors)

    @property
    def n(self) -> int:
        return len(self.parent)

    def lowest_common_ancestor(self, u: int, v: int) -> int:
        if self.level[u] < self.level[v]:
            u, v = v, u
        diff = int(self.level[u] - self.level[v])
        k = 0
        while diff:
            if diff & 1:
                u = self.ancestors[k][u]
            diff >>= 1
            k += 1
        if u == v:
            return u
        for k in reversed(range(len(self.ancestors))):
            if self.ancestors[k][u] != self.ancestors[k][v]:
                u, v = self.ancestors[k][u], self.ancestors[k][v]
        return self.parent[u]

    def tree_distance(self, u: int, v: int) -> float:
        """Distance between u and v in the undirected tree."""
        a = self.lowest_common_ancestor(u, v)
        return float(self.depth[u] + self.depth[v] - 2 * self.depth[a])

    def path_from_root(self, v: int) -> List[int]:
        """Vertices other than the root on the root-to-v path, leaf last."""
        path: List[int] = []
        while v != self.root:
            path.append(v)
            v = self.parent[v]
        path.reverse()
        return path

    def verify(self, g: DirectedGraph) -> None:
        if self.n != g.n:
            raise RoutingFailure(f"Arborescence spans {self.n} vertices, graph has {g.n}.")
        for v in range(self.n):
            if v == self.root:
                continue
            at = self.parent[v]
            total = 0.0
            for e in self.witness[v]:
                if g.tails[e] != at:
                    raise RoutingFailure(f"Witness path of arc ({self.parent[v]}, {v}) is broken.")
                at = int(g.heads[e])
                total += float(g.lengths[e])
            if at != v:
                raise RoutingFailure(f"Witness path of arc ({self.parent[v]}, {v}) ends at {at}.")
            if abs(total - self.arc_length[v]) > 1e-9 * max(total, 1.0):
                raise RoutingFailure(
                    f"Arc ({self.parent[v]}, {v}) has length {self.arc_length[v]} "
                    f"but its witness path has length {total}."
                )


def _check_spans(g: DirectedGraph, tree: Arborescence) -> None:
    if tree.n != g.n:
        raise RoutingFailure(f"Arborescence spans {tree.n} vertices, graph has {g.n}.")


def total_stretch(g: DirectedGraph, tree: Arborescence) -> float:
    _check_spans(g, tree)
    return float(
        sum(
            e.weight * tree.tree_distance(e.tail, e.head)
            for e in g.edges
        )
    )


def load(g: DirectedGraph, tree: Arborescence) -> Vector:
    """
    load[v] is the total weight of G-edges whose tree path uses the arc into v
    (0 for the root). Each edge adds its weight at both endpoints and removes
    twice that at their common ancestor; subtree sums then give the loads.
    """
    _check_spans(g, tree)
    acc = np.zeros(g.n)
    for e in g.edges:
        acc[e.tail] += e.weight
        acc[e.head] += e.weight
        acc[tree.lowest_common_ancestor(e.tail, e.head)] -= 2 * e.weight
    for v in reversed(tree.order):
        if v != tree.root:
            acc[tree.parent[v]] += acc[v]
    acc[tree.root] = 0.0
    return acc


def edge_load(g: DirectedGraph, tree: Arborescence) -> Vector:
    """Tree-arc loads pushed onto the G-edges of the arcs' witness paths."""
    arc_load = load(g, tree)
    result = np.zeros(g.m)
    for v in range(g.n):
        for e in tree.witness[v]:
            result[e] += arc_load[v]
    return result


@dataclass
class _Builder:
    g: DirectedGraph
    c: float
    depth_limit: int
    parent: List[int]
    arc_length: List[float]
    witness: List[Tuple[int, ...]]
    max_depth: int = 0

    def build(self, vertices: List[int], center: int, rng: np.random.Generator, depth: int) -> None:
        self.max_depth = max(self.max_depth, depth)
        if depth > self.depth_limit:
            raise RoutingFailure(
                f"Arborescence recursion exceeded depth {self.depth_limit}; radii are not shrinking."
            )
        if len(vertices) == 1:
            return
        sub = induced_subgraph(self.g, vertices)
        local_center = sub.local_index[center]
        paths = shortest_paths(sub.graph, local_center)
        if np.isinf(paths.dist).any():
            raise RoutingFailure(f"Some vertices are unreachable from {center} inside their cluster.")
        n = len(vertices)
        radius = float(paths.dist.max())
        inner_radius = radius / (self.c * math.log(n))
        collapsed = collapse(sub.graph, inner_radius / n, 2 * inner_radius)
        partition = cluster_directed_rooted(
            collapsed.graph, int(collapsed.component[local_center]), inner_radius, rng
        )

        clusters: List[Tuple[int, List[int]]] = []
        for i, root in enumerate(partition.roots):
            local_members = [
                v
                for supervertex in partition.members(i)
                for v in collapsed.members[supervertex]
            ]
            cluster_center = local_center if i == 0 else min(collapsed.members[root])
            clusters.append(
                (sub.vertices[cluster_center], sorted(sub.vertices[v] for v in local_members))
            )
        if any(len(members) == n for _, members in clusters):
            raise RoutingFailure(f"Decomposition around {center} did not split its cluster.")

        for cluster_center, _ in clusters[1:]:
            local = sub.local_index[cluster_center]
            path = tuple(sub.edge_ids[e] for e in paths.path_to(local))
            self.parent[cluster_center] = center
            self.witness[cluster_center] = path
            self.arc_length[cluster_center] = float(sum(self.g.lengths[e] for e in path))

        for (cluster_center, members), child_rng in zip(clusters, spawn(rng, len(clusters))):
            self.build(members, cluster_center, child_rng, depth + 1)


def depth_limit(g: DirectedGraph, s: int, c: float) -> int:
    """
    Cluster radii shrink by at least c ln 2 / 2 per level and never drop below
    the shortest edge while a cluster has two vertices.
    """
    radius = float(shortest_dist(g, s).max())
    if g.m == 0 or radius == 0:
        return 1
    shrink = c * math.log(2) / 2
    return int(math.floor(math.log(radius / float(g.lengths.min())) / math.log(shrink))) + 2


def find_arborescence(
    g: DirectedGraph, s: int, rng: np.random.Generator, c: float = 8.0
) -> Arborescence:
    if c < 4:
        raise RoutingFailure(f"The radius divisor constant must be at least 4, got {c}.")
    if not 0 <= s < g.n:
        raise RoutingFailure(f"Root {s} is not a vertex.")
    limit = depth_limit(g, s, c)
    builder = _Builder(g, c, limit, [-1] * g.n, [0.0] * g.n, [()] * g.n)
    builder.build(list(range(g.n)), s, rng, 0)
    tree = Arborescence(s, tuple(builder.parent), tuple(builder.arc_length), tuple(builder.witness))
    tree.verify(g)
    logger.debug("arborescence from %d: recursion depth %d (limit %d)", s, builder.max_depth, limit)
    return tree


def stretch_summary(g: DirectedGraph, tree: Arborescence) -> Dict[str, float]:
    stretch = total_stretch(g, tree)
    n = g.n
    log_n = math.log(max(n, 3))
    scale = volume(g) * log_n**3 / math.log(log_n)
    return {
        "total_stretch": stretch,
        "volume": volume(g),
        "normalized": stretch / scale,
    }
