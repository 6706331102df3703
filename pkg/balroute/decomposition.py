"""
Low-radius decompositions of directed graphs by exponentially shifted
shortest paths, and the rooted variant that carves a random ball around a
given vertex first.
"""
from dataclasses import dataclass
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from .error import RoutingFailure
from .graph import DirectedGraph, Vector, induced_subgraph, multi_source_paths, shortest_paths
from .trials import map_trials, make_rng, spawn_seeds

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Partition:
    # cluster index per vertex; cluster i is rooted at roots[i]
    assignment: NDArray[np.int64]
    roots: Tuple[int, ...]
    radii: Tuple[float, ...]
    radius_bound: float
    cut_weight: float
    shifts: Optional[Vector] = None
    attempts: int = 1
    # the ball radius r' drawn by the rooted variant
    ball_radius: Optional[float] = None

    @property
    def cluster_count(self) -> int:
        return len(self.roots)

    def members(self, cluster: int) -> List[int]:
        return [int(v) for v in np.flatnonzero(self.assignment == cluster)]

    def verify(self, g: DirectedGraph) -> None:
        if self.assignment.shape != (g.n,):
            raise RoutingFailure("Partition does not cover the graph's vertices.")
        for i, root in enumerate(self.roots):
            if self.assignment[root] != i:
                raise RoutingFailure(f"Cluster {i} does not contain its root {root}.")
        if set(int(c) for c in self.assignment) != set(range(len(self.roots))):
            raise RoutingFailure("Partition has empty or unnamed clusters.")
        if any(radius > self.radius_bound for radius in self.radii):
            raise RoutingFailure(
                f"Cluster radius {max(self.radii)} exceeds the bound {self.radius_bound}."
            )


def _cut_weight(g: DirectedGraph, assignment: NDArray[np.int64]) -> float:
    return float(g.weights[assignment[g.tails] != assignment[g.heads]].sum())


def shift_rate(n: int, r: float) -> float:
    """
    Exp(10 ln n / r) shifts exceed r with probability n^-10 each, so a draw
    meets the radius bound with high probability and the expected number of
    cut edges on a cycle of length L stays O(L ln n / r).
    """
    return 10 * math.log(n) / r


def attempt_limit(n: int) -> int:
    return math.ceil(100 * math.log(max(n, 2)))


def shifted_partition(g: DirectedGraph, r: float, rng: np.random.Generator) -> Partition:
    """
    A single draw: every vertex v gets a start time x_v ~ Exp(10 ln n / r),
    and u joins the root minimizing -x_v + d(v, u). The radius bound is not
    enforced; `cluster_directed` redraws until it holds.
    """
    if not r > 0:
        raise RoutingFailure(f"Radius must be positive, got {r}.")
    n = g.n
    if n == 1:
        return Partition(np.zeros(1, dtype=np.int64), (0,), (0.0,), r, 0.0, np.zeros(1))
    beta = shift_rate(n, r)
    # Exp(beta) as -ln(U) / beta with U uniform in (0, 1].
    shifts = -np.log(1.0 - rng.random(n)) / beta
    sweep = multi_source_paths(g, -shifts)
    roots = tuple(int(v) for v in np.unique(sweep.owner))
    index = {root: i for i, root in enumerate(roots)}
    assignment = np.array([index[int(o)] for o in sweep.owner], dtype=np.int64)
    # key[u] = -x_root + d(root, u) along a path inside the cluster
    distance = sweep.key + shifts[sweep.owner]
    radii = np.zeros(len(roots))
    np.maximum.at(radii, assignment, distance)
    return Partition(
        assignment,
        roots,
        tuple(float(x) for x in radii),
        r,
        _cut_weight(g, assignment),
        shifts,
    )


def cluster_directed(g: DirectedGraph, r: float, rng: np.random.Generator) -> Partition:
    limit = attempt_limit(g.n)
    for attempt in range(1, limit + 1):
        partition = shifted_partition(g, r, rng)
        if max(partition.radii) <= r:
            if attempt > 1:
                logger.debug("decomposition with r=%g needed %d draws", r, attempt)
            return Partition(
                partition.assignment,
                partition.roots,
                partition.radii,
                r,
                partition.cut_weight,
                partition.shifts,
                attempt,
            )
    raise RoutingFailure(
        f"Could not find a decomposition with radius {r} on {g.n} vertices "
        f"in {limit} draws; the largest cluster radius of the last draw was "
        f"{max(partition.radii)}."
    )


def cluster_directed_rooted(
    g: DirectedGraph, s: int, r: float, rng: np.random.Generator
) -> Partition:
    """
    Cluster 0 is the ball of radius r' ~ U[0, r] around s; the remaining
    vertices are decomposed by `cluster_directed` on their induced subgraph.
    """
    if not r > 0:
        raise RoutingFailure(f"Radius must be positive, got {r}.")
    if not 0 <= s < g.n:
        raise RoutingFailure(f"Root {s} is not a vertex.")
    ball_radius = float(rng.uniform(0.0, r))
    dist = shortest_paths(g, s).dist
    in_ball = dist <= ball_radius
    rest = [int(v) for v in np.flatnonzero(~in_ball)]
    assignment = np.zeros(g.n, dtype=np.int64)
    roots: List[int] = [s]
    radii: List[float] = [float(dist[in_ball].max())]
    attempts = 1
    if rest:
        sub = induced_subgraph(g, rest)
        inner = cluster_directed(sub.graph, r, rng)
        attempts = inner.attempts
        for local, cluster in enumerate(inner.assignment):
            assignment[sub.vertices[local]] = int(cluster) + 1
        roots += [sub.vertices[root] for root in inner.roots]
        radii += list(inner.radii)
    return Partition(
        assignment,
        tuple(roots),
        tuple(radii),
        r,
        _cut_weight(g, assignment),
        None,
        attempts,
        ball_radius,
    )


@dataclass(frozen=True)
class CycleCutStatistic:
    # mean over trials of (#cut cycle edges) * r / (length(C) * ln n)
    mean: float
    variance: float
    trials: int
    mean_cut_fraction: float


def cycle_edges(g: DirectedGraph, cycle: Sequence[int]) -> List[int]:
    """The shortest edge between each consecutive pair of a directed cycle."""
    if len(cycle) < 2 or len(set(cycle)) != len(cycle):
        raise RoutingFailure(f"{list(cycle)} is not a simple cycle.")
    edges: List[int] = []
    for u, v in zip(cycle, list(cycle[1:]) + [cycle[0]]):
        candidates = [e for e in g.out_edges[u] if g.heads[e] == v]
        if not candidates:
            raise RoutingFailure(f"Cycle uses a missing edge ({u}, {v}).")
        edges.append(min(candidates, key=lambda e: g.lengths[e]))
    return edges


def _draw(g: DirectedGraph, r: float, seed: int, redraw: bool) -> Partition:
    rng = make_rng(seed)
    return cluster_directed(g, r, rng) if redraw else shifted_partition(g, r, rng)


def _count_cut(args: Tuple[DirectedGraph, float, int, bool, Tuple[int, ...]]) -> int:
    g, r, seed, redraw, edges = args
    assignment = _draw(g, r, seed, redraw).assignment
    return sum(1 for e in edges if assignment[g.tails[e]] != assignment[g.heads[e]])


def cycle_cut_statistic(
    g: DirectedGraph,
    r: float,
    cycle: Sequence[int],
    trials: int,
    rng: np.random.Generator,
    redraw: bool = True,
    parallel: Optional[int] = None,
) -> CycleCutStatistic:
    if trials < 1:
        raise RoutingFailure("Need at least one trial.")
    if not r > 0:
        raise RoutingFailure(f"Radius must be positive, got {r}.")
    edges = tuple(cycle_edges(g, cycle))
    cycle_length = float(g.lengths[list(edges)].sum())
    log_n = math.log(max(g.n, 2))
    counts = np.array(
        map_trials(
            _count_cut,
            [(g, r, seed, redraw, edges) for seed in spawn_seeds(rng, trials)],
            parallel,
        ),
        dtype=np.float64,
    )
    normalized = counts * r / (cycle_length * log_n)
    return CycleCutStatistic(
        float(normalized.mean()),
        float(normalized.var()),
        trials,
        float(counts.mean() / len(edges)),
    )


def edge_cut_probability(
    g: DirectedGraph,
    edge: int,
    r: float,
    trials: int,
    rng: np.random.Generator,
    redraw: bool = True,
    parallel: Optional[int] = None,
) -> float:
    """Fraction of draws in which the endpoints of `edge` land in different clusters."""
    if not 0 <= edge < g.m:
        raise RoutingFailure(f"Edge {edge} does not exist.")
    if trials < 1:
        raise RoutingFailure("Need at least one trial.")
    counts = map_trials(
        _count_cut,
        [(g, r, seed, redraw, (edge,)) for seed in spawn_seeds(rng, trials)],
        parallel,
    )
    return sum(counts) / trials
