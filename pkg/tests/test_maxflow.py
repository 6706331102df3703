import math
from typing import List, Tuple

from hypothesis import given, settings
from hypothesis import strategies as st
import numpy as np
import pytest

from balroute.error import RoutingFailure
from balroute.generators import generate
from balroute.graph import DemandVector, DirectedGraph, Edge, congestion, incidence_apply
from balroute.lower_bounds import gen_lowerbound_general
from balroute.maxflow import (
    almost_route_directed,
    build_approximator,
    dual_value,
    fast_almost_route,
    lmax,
    lmax_grad,
    max_st_flow,
    measure_quality,
    min_congestion_route,
    proximal_step,
)
from balroute.options import ApproximatorKind
from balroute.oracles import all_cuts_congestion_approximator, exact_max_flow, exact_min_congestion
from balroute.trials import make_rng

from .strategies import eulerian_graphs, graphs_with_demand


def two_cycle(w_uv: float = 1.0, w_vu: float = 1.0) -> DirectedGraph:
    return DirectedGraph(2, (Edge(0, 1, w_uv), Edge(1, 0, w_vu)))


def test_lmax_at_zero() -> None:
    for m in (1, 4, 9):
        assert lmax(np.zeros(m)) == pytest.approx(math.log(2 * m))
        assert not lmax_grad(np.zeros(m)).any()


@given(st.lists(st.floats(-50.0, 50.0), min_size=1, max_size=8))
def test_lmax_sandwich(values: List[float]) -> None:
    x = np.array(values)
    top = float(np.abs(x).max())
    assert top - 1e-12 <= lmax(x) <= top + math.log(2 * len(x)) + 1e-12
    assert float(np.abs(lmax_grad(x)).sum()) <= 1 + 1e-12


def test_lmax_gradient_matches_finite_differences() -> None:
    rng = np.random.default_rng(3)
    x = rng.uniform(-2.0, 2.0, size=6)
    grad = lmax_grad(x)
    h = 1e-6
    for i in range(len(x)):
        step = np.zeros(len(x))
        step[i] = h
        numeric = (lmax(x + step) - lmax(x - step)) / (2 * h)
        assert numeric == pytest.approx(grad[i], abs=1e-6)


def test_lmax_does_not_overflow() -> None:
    assert lmax(np.array([1000.0, -2000.0])) == pytest.approx(2000.0)


@given(graphs_with_demand(max_n=5), st.integers(0, 2**16))
def test_dual_value_is_a_lower_bound(case: Tuple[DirectedGraph, DemandVector], seed: int) -> None:
    g, b = case
    v = np.random.default_rng(seed).standard_normal(g.n)
    assert dual_value(g, b, v) <= exact_min_congestion(g, b).value * (1 + 1e-9) + 1e-12


def test_almost_route_on_the_two_cycle() -> None:
    g = two_cycle()
    approx = all_cuts_congestion_approximator(g)
    assert approx.quality == 1.0
    b = np.array([-0.5, 0.5])
    eps = 0.25
    for result in (
        almost_route_directed(g, approx, b, eps),
        fast_almost_route(g, approx, b, eps),
    ):
        lower, upper = result.congestion_bounds()
        assert lower <= 0.5 * (1 + 1e-9)
        assert upper >= 0.5 * (1 - 1e-9)
        assert upper <= (1 + eps) * lower * (1 + 1e-9)
        assert result.gap <= 1 + eps + 1e-9


def test_almost_route_zero_demand() -> None:
    g = two_cycle()
    result = almost_route_directed(g, all_cuts_congestion_approximator(g), np.zeros(2), 0.5)
    assert result.primal == 0.0
    assert not result.flow.any()


@settings(max_examples=8)
@given(graphs_with_demand(max_n=5), st.booleans())
def test_min_congestion_route_is_near_optimal(
    case: Tuple[DirectedGraph, DemandVector], fast: bool
) -> None:
    g, b = case
    eps = 0.5
    result = min_congestion_route(g, b, eps, fast=fast)
    opt = exact_min_congestion(g, b).value
    assert (result.flow >= -1e-12).all()
    assert np.allclose(incidence_apply(g, result.flow), b, atol=1e-7)
    assert congestion(g, result.flow) <= (1 + eps) * opt * (1 + 1e-6)
    assert result.congestion >= opt * (1 - 1e-6)
    assert result.cut_ratio <= opt * (1 + 1e-6)
    assert result.primal_bound <= (1 + eps) * result.dual_bound * (1 + 1e-9)


@settings(max_examples=5)
@given(eulerian_graphs(max_n=5))
def test_eulerian_graphs_route_fast(g: DirectedGraph) -> None:
    b = np.zeros(g.n)
    b[0], b[-1] = -1.0, 1.0
    result = min_congestion_route(g, b, 0.25)
    opt = exact_min_congestion(g, b).value
    assert result.congestion <= 1.25 * opt * (1 + 1e-6)


def test_max_flow_on_two_parallel_paths() -> None:
    g = DirectedGraph(
        4,
        (Edge(0, 1, 1.0), Edge(1, 3, 1.0), Edge(0, 2, 1.0), Edge(2, 3, 1.0), Edge(3, 0, 1.0)),
    )
    eps = 0.2
    result = max_st_flow(g, 0, 3, eps)
    assert 2 / (1 + eps) * (1 - 1e-9) <= result.value <= 2 + 1e-9
    assert congestion(g, result.flow) <= 1 + 1e-9
    assert 0 in result.cut.members and 3 not in result.cut.members
    assert 2 - 1e-9 <= result.cut_capacity <= 2 * (1 + eps) + 1e-9


@settings(max_examples=6)
@given(st.integers(4, 8), st.integers(0, 2**16))
def test_max_flow_within_eps_of_exact(n: int, seed: int) -> None:
    g = generate("balanced", {"n": str(n), "cycles": "3", "perturb": "0.5"}, seed)
    eps = 0.25
    exact, _, _ = exact_max_flow(g, 0, n - 1)
    result = max_st_flow(g, 0, n - 1, eps)
    assert exact / (1 + eps) * (1 - 1e-9) <= result.value <= exact * (1 + 1e-9)
    assert result.cut_capacity >= exact * (1 - 1e-9)


def test_proximal_step_without_gradient_stays_put() -> None:
    g = two_cycle()
    f = proximal_step(g, np.zeros(2), np.zeros(2), 4.0, 10.0)
    assert np.allclose(f, 0.0)


def test_proximal_step_matches_grid_search() -> None:
    g = two_cycle()
    grad = np.array([-3.0, 0.0])
    smoothness, box = 4.0, 10.0
    f = proximal_step(g, grad, np.zeros(2), smoothness, box)

    def objective(x: float) -> float:
        return grad[0] * x + smoothness / 2 * x * x + x

    grid = np.arange(0.0, box, 1e-4)
    best = min(objective(float(x)) for x in grid)
    assert objective(float(f[0])) <= best + 1e-8
    assert f[0] == pytest.approx(0.5, abs=1e-6)
    assert f[1] == pytest.approx(0.0, abs=1e-9)


def test_proximal_step_needs_a_feasible_start() -> None:
    with pytest.raises(RoutingFailure, match="inside the box"):
        proximal_step(two_cycle(), np.zeros(2), np.array([20.0, 0.0]), 4.0, 10.0)


@pytest.mark.parametrize("eps", [0.0, 0.6, -0.1])
def test_accuracy_must_be_in_range(eps: float) -> None:
    g = two_cycle()
    b = np.array([-1.0, 1.0])
    with pytest.raises(RoutingFailure, match="Accuracy"):
        min_congestion_route(g, b, eps)
    with pytest.raises(RoutingFailure, match="Accuracy"):
        almost_route_directed(g, all_cuts_congestion_approximator(g), b, eps)


def test_max_flow_rejects_bad_terminals() -> None:
    g = two_cycle()
    with pytest.raises(RoutingFailure, match="differ"):
        max_st_flow(g, 1, 1, 0.5)
    with pytest.raises(RoutingFailure, match="pair of vertices"):
        max_st_flow(g, 0, 2, 0.5)


def test_all_cuts_quality_is_measured_exactly() -> None:
    g = generate("random", {"n": "6", "p": "0.3"}, 4)
    approx = build_approximator(g, ApproximatorKind.ALL_CUTS)
    report = measure_quality(g, approx, 12, make_rng(0))
    assert report.samples == 12
    assert report.lower >= 1 - 1e-6
    assert report.upper <= approx.quality * (1 + 1e-6)


def test_tree_approximator_underestimates() -> None:
    g = generate("bidirected", {"n": "8", "p": "0.3"}, 2)
    approx = build_approximator(g, ApproximatorKind.TREE, make_rng(2))
    assert approx.name == "tree"
    assert approx.quality >= 1.0
    report = measure_quality(g, approx, 10, make_rng(5))
    assert report.lower >= 1 - 1e-6


def test_approximators_need_strong_connectivity() -> None:
    with pytest.raises(RoutingFailure, match="strongly connected"):
        build_approximator(gen_lowerbound_general(2))
    assert build_approximator(two_cycle()).name == "all-cuts"
