import math
from typing import Tuple

from hypothesis import given
import numpy as np
import pytest

from balroute.error import RoutingFailure
from balroute.graph import (
    Cut,
    DemandVector,
    DirectedGraph,
    Edge,
    congestion,
    cut_weight,
    incidence_apply,
    unit_demand,
)
from balroute.lower_bounds import gen_lowerbound_general
from balroute.oracles import (
    MAX_ENUMERATION_VERTICES,
    all_cuts_congestion_approximator,
    brute_force_imbalance,
    brute_force_min_congestion,
    brute_force_sparsest_cut,
    enumerate_cuts,
    exact_max_flow,
    exact_min_congestion,
    optimal_multicommodity_congestion,
)

from .strategies import graphs, graphs_with_demand


def two_cycle(w_uv: float, w_vu: float) -> DirectedGraph:
    return DirectedGraph(2, (Edge(0, 1, w_uv), Edge(1, 0, w_vu)))


def directed_cycle(n: int) -> DirectedGraph:
    return DirectedGraph(n, tuple(Edge(i, (i + 1) % n, 1.0) for i in range(n)))


def test_max_flow_examples() -> None:
    value, flow, cut = exact_max_flow(two_cycle(3.0, 1.0), 0, 1)
    assert value == 3.0
    assert list(flow) == [3.0, 0.0]
    assert cut == Cut(frozenset({0}))

    k = 3
    g = gen_lowerbound_general(k)
    value, _, _ = exact_max_flow(g, 2 * k, 2 * k + 1)
    assert value == k
    # one direct biclique arc plus the route through both hubs
    value, _, _ = exact_max_flow(g, 0, k)
    assert value == k + 1


def test_max_flow_rejects_equal_endpoints() -> None:
    with pytest.raises(RoutingFailure, match="differ"):
        exact_max_flow(directed_cycle(3), 1, 1)


@given(graphs(min_n=3))
def test_max_flow_matches_min_cut(g: DirectedGraph) -> None:
    value, flow, cut = exact_max_flow(g, 0, g.n - 1)
    assert 0 in cut.members and g.n - 1 not in cut.members
    forward, _ = cut_weight(g, cut)
    assert math.isclose(value, forward, rel_tol=1e-9)
    assert congestion(g, flow) <= 1 + 1e-9
    assert np.allclose(incidence_apply(g, flow), unit_demand(g.n, 0, g.n - 1, value), atol=1e-9)


@given(graphs_with_demand())
def test_min_congestion_matches_cut_enumeration(case: Tuple[DirectedGraph, DemandVector]) -> None:
    g, b = case
    result = exact_min_congestion(g, b)
    expected, _ = brute_force_min_congestion(g, b)
    assert math.isclose(result.value, expected, rel_tol=1e-6)
    assert np.allclose(incidence_apply(g, result.flow), b, atol=1e-7)
    assert congestion(g, result.flow) <= result.value * (1 + 1e-6)
    assert result.cut is not None
    assert math.isclose(result.cut_ratio, result.value, rel_tol=1e-6)


def test_min_congestion_of_zero_demand() -> None:
    result = exact_min_congestion(directed_cycle(4), np.zeros(4))
    assert result.value == 0.0
    assert result.cut is None
    assert not result.flow.any()


def test_min_congestion_two_cycle() -> None:
    g = two_cycle(2.0, 1.0)
    result = exact_min_congestion(g, np.array([-1.0, 1.0]))
    assert math.isclose(result.value, 0.5)
    assert result.cut == Cut(frozenset({1}))
    assert math.isclose(exact_min_congestion(g, np.array([1.0, -1.0])).value, 1.0)


def test_enumerate_cuts_counts() -> None:
    g = directed_cycle(5)
    rows = sum(len(block.members) for block in enumerate_cuts(g))
    assert rows == 2**5 - 2
    for block in enumerate_cuts(g):
        assert (block.forward == block.backward).all()


def test_enumerate_cuts_limit() -> None:
    g = directed_cycle(MAX_ENUMERATION_VERTICES + 1)
    with pytest.raises(RoutingFailure, match="limited"):
        next(enumerate_cuts(g))


def test_brute_force_examples() -> None:
    bal, cut = brute_force_imbalance(two_cycle(2.0, 1.0))
    assert bal == 2.0
    assert cut == Cut(frozenset({0}))
    sparsity, cut = brute_force_sparsest_cut(directed_cycle(4))
    assert sparsity == 0.25
    assert len(cut) == 2


def test_all_cuts_approximator_two_cycle() -> None:
    approx = all_cuts_congestion_approximator(two_cycle(2.0, 1.0))
    assert approx.quality == 2.0
    assert approx.rows == 2
    assert approx.norm(np.array([-1.0, 1.0])) == 0.5


@given(graphs_with_demand(max_n=6))
def test_all_cuts_approximator_brackets_optimum(case: Tuple[DirectedGraph, DemandVector]) -> None:
    g, b = case
    approx = all_cuts_congestion_approximator(g)
    opt, _ = brute_force_min_congestion(g, b)
    norm = approx.norm(b)
    assert norm <= opt * (1 + 1e-9)
    assert opt <= approx.quality * norm * (1 + 1e-9)


def test_multicommodity_examples() -> None:
    assert math.isclose(optimal_multicommodity_congestion(two_cycle(2.0, 1.0), [(0, 1, 1.0)]), 0.5)
    cycle = directed_cycle(4)
    # two commodities crossing the same arc
    value = optimal_multicommodity_congestion(cycle, [(0, 2, 1.0), (1, 3, 1.0)])
    assert math.isclose(value, 2.0, rel_tol=1e-7)
    assert optimal_multicommodity_congestion(cycle, []) == 0.0
    with pytest.raises(RoutingFailure, match="Invalid demand pair"):
        optimal_multicommodity_congestion(cycle, [(1, 1, 1.0)])


@given(graphs_with_demand(max_n=5))
def test_single_commodity_is_a_special_case(case: Tuple[DirectedGraph, DemandVector]) -> None:
    g, b = case
    sources = [v for v in range(g.n) if b[v] < 0]
    sinks = [v for v in range(g.n) if b[v] > 0]
    # route the demand as one commodity per (source, sink) in proportion
    total = float(b[sinks].sum())
    pairs = [(s, t, float(-b[s] * b[t] / total)) for s in sources for t in sinks]
    multi = optimal_multicommodity_congestion(g, pairs)
    single = exact_min_congestion(g, b).value
    assert multi >= single * (1 - 1e-6)
