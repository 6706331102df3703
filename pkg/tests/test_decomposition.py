from typing import List

from hypothesis import given
from hypothesis import strategies as st
import numpy as np
import pytest

from balroute.decomposition import (
    attempt_limit,
    cluster_directed,
    cluster_directed_rooted,
    cycle_cut_statistic,
    cycle_edges,
    edge_cut_probability,
    shifted_partition,
)
from balroute.error import RoutingFailure
from balroute.generators import generate
from balroute.graph import (
    DirectedGraph,
    Edge,
    induced_subgraph,
    multi_source_paths,
    shortest_paths,
)
from balroute.trials import make_rng

from .strategies import graphs


def directed_cycle(n: int) -> DirectedGraph:
    return DirectedGraph(n, tuple(Edge(i, (i + 1) % n, 1.0) for i in range(n)))


def max_inner_distance(g: DirectedGraph, members: List[int], root: int) -> float:
    sub = induced_subgraph(g, members)
    return float(shortest_paths(sub.graph, sub.local_index[root]).dist.max())


@given(graphs(), st.sampled_from([0.5, 1.0, 2.0, 4.0]), st.integers(0, 2**16))
def test_clusters_have_bounded_radius(g: DirectedGraph, r: float, seed: int) -> None:
    partition = cluster_directed(g, r, make_rng(seed))
    partition.verify(g)
    assert 1 <= partition.attempts <= attempt_limit(g.n)
    for i, root in enumerate(partition.roots):
        assert max_inner_distance(g, partition.members(i), root) <= r + 1e-9


@given(graphs(), st.integers(0, 2**16))
def test_single_draw_covers_every_vertex(g: DirectedGraph, seed: int) -> None:
    partition = shifted_partition(g, 1.5, make_rng(seed))
    assert sum(len(partition.members(i)) for i in range(partition.cluster_count)) == g.n
    assert partition.shifts is not None and (partition.shifts >= 0).all()
    crossing = partition.assignment[g.tails] != partition.assignment[g.heads]
    assert partition.cut_weight == pytest.approx(float(g.weights[crossing].sum()))


def test_single_vertex() -> None:
    g = DirectedGraph(1, ())
    partition = cluster_directed(g, 1.0, make_rng(0))
    assert partition.cluster_count == 1
    assert partition.radii == (0.0,)
    assert partition.cut_weight == 0.0


def test_large_radius_keeps_cycle_whole_most_of_the_time() -> None:
    g = directed_cycle(6)
    rng = make_rng(7)
    whole = sum(cluster_directed(g, 1e4, rng).cluster_count == 1 for _ in range(20))
    assert whole >= 15


@given(graphs(), st.integers(0, 2**16))
def test_rooted_decomposition_carves_a_ball(g: DirectedGraph, seed: int) -> None:
    r = 2.0
    partition = cluster_directed_rooted(g, 0, r, make_rng(seed))
    partition.verify(g)
    assert partition.roots[0] == 0
    assert partition.ball_radius is not None and 0 <= partition.ball_radius <= r
    dist = shortest_paths(g, 0).dist
    ball = set(int(v) for v in np.flatnonzero(dist <= partition.ball_radius))
    assert set(partition.members(0)) == ball


def test_rooted_decomposition_errors() -> None:
    g = directed_cycle(3)
    with pytest.raises(RoutingFailure, match="not a vertex"):
        cluster_directed_rooted(g, 3, 1.0, make_rng(0))
    with pytest.raises(RoutingFailure, match="positive"):
        cluster_directed_rooted(g, 0, 0.0, make_rng(0))
    with pytest.raises(RoutingFailure, match="positive"):
        cluster_directed(g, -1.0, make_rng(0))


def test_cycle_edges() -> None:
    g = DirectedGraph(
        3,
        (Edge(0, 1, 1.0, 3.0), Edge(0, 1, 1.0, 2.0), Edge(1, 2, 1.0), Edge(2, 0, 1.0)),
    )
    assert cycle_edges(g, [0, 1, 2]) == [1, 2, 3]
    with pytest.raises(RoutingFailure, match="simple cycle"):
        cycle_edges(g, [0, 1, 0])
    with pytest.raises(RoutingFailure, match="missing edge"):
        cycle_edges(g, [0, 2, 1])


def test_cycle_cut_statistic() -> None:
    g = directed_cycle(8)
    stat = cycle_cut_statistic(g, 2.0, list(range(8)), 20, make_rng(1))
    assert stat.trials == 20
    assert 0.0 <= stat.mean_cut_fraction <= 1.0
    assert stat.mean >= 0.0 and stat.variance >= 0.0
    again = cycle_cut_statistic(g, 2.0, list(range(8)), 20, make_rng(1))
    assert again == stat


def test_edge_cut_probability_extremes() -> None:
    g = directed_cycle(2)
    assert edge_cut_probability(g, 0, 0.01, 10, make_rng(0)) == 1.0
    assert edge_cut_probability(g, 0, 1000.0, 50, make_rng(0)) <= 0.2
    with pytest.raises(RoutingFailure, match="does not exist"):
        edge_cut_probability(g, 2, 1.0, 10, make_rng(0))
    with pytest.raises(RoutingFailure, match="trial"):
        cycle_cut_statistic(g, 1.0, [0, 1], 0, make_rng(0))


def test_long_cycle_with_a_small_radius() -> None:
    g = directed_cycle(200)
    partition = cluster_directed(g, 20.0, make_rng(0))
    partition.verify(g)
    assert partition.attempts == 1
    assert max(partition.radii) <= 20.0
    assert partition.cluster_count > 10


@given(graphs(max_n=9), st.sampled_from([0.5, 2.0, 8.0]), st.integers(0, 2**16))
def test_cluster_paths_stay_inside_the_cluster(g: DirectedGraph, r: float, seed: int) -> None:
    partition = cluster_directed(g, r, make_rng(seed))
    assert partition.shifts is not None
    sweep = multi_source_paths(g, -partition.shifts)
    for u in range(g.n):
        cluster = int(partition.assignment[u])
        root = partition.roots[cluster]
        v = u
        while v != root:
            e = int(sweep.pred_edge[v])
            assert e >= 0
            v = int(g.tails[e])
            assert partition.assignment[v] == cluster


def test_counterexample_edge_is_cut_most_of_the_time() -> None:
    g = generate("mpx-counterexample", {"k": "3", "star": "1024"}, 0)
    # edge 26 is (u, v) with v the star's center
    assert (int(g.tails[26]), int(g.heads[26])) == (26, 0)
    assert edge_cut_probability(g, 26, 8.0, 100, make_rng(0)) > 0.5
