import math

from hypothesis import assume, given, settings
import numpy as np
import pytest

from balroute.balance import imbalance_exact
from balroute.balance_check import BalanceDecision, check_balance, softened
from balroute.error import RoutingFailure
from balroute.graph import Cut, DirectedGraph, Edge
from balroute.lower_bounds import gen_lowerbound_eulerian
from balroute.oracles import brute_force_imbalance

from .strategies import eulerian_graphs, graphs


def two_cycle(w_uv: float, w_vu: float) -> DirectedGraph:
    return DirectedGraph(2, (Edge(0, 1, w_uv), Edge(1, 0, w_vu)))


def test_eulerian_graph_is_certified_balanced() -> None:
    g = gen_lowerbound_eulerian(5)
    check = check_balance(g, 1.5, 0.1)
    assert check.decision == BalanceDecision.CERTIFIED_BALANCED
    assert check.phase == 2
    assert check.certificate.circulation is not None
    assert np.allclose(check.certificate.circulation, g.weights)


def test_two_cycle_is_certified_unbalanced() -> None:
    g = two_cycle(2.0, 1.0)
    check = check_balance(g, 1.5, 0.1)
    assert check.decision == BalanceDecision.CERTIFIED_UNBALANCED
    assert check.certificate.violating_cut == Cut(frozenset({0}))
    assert str(check.decision) == "unbalanced"


def test_two_cycle_at_its_imbalance() -> None:
    check = check_balance(two_cycle(2.0, 1.0), 2.5, 0.1)
    assert check.decision == BalanceDecision.CERTIFIED_BALANCED
    check.certificate.verify(two_cycle(2.0, 1.0))


@settings(max_examples=8)
@given(eulerian_graphs(max_n=5))
def test_balanced_side_is_sound(g: DirectedGraph) -> None:
    check = check_balance(g, 1.25, 0.1)
    assert check.decision == BalanceDecision.CERTIFIED_BALANCED
    check.certificate.verify(g)


@settings(max_examples=8)
@given(graphs(max_n=5))
def test_decisions_agree_with_exact_imbalance(g: DirectedGraph) -> None:
    bal, _ = imbalance_exact(g)
    assume(bal >= 2.5)
    eps = 0.1
    low = check_balance(g, bal / 2, eps)
    assert low.decision == BalanceDecision.CERTIFIED_UNBALANCED
    low.certificate.verify(g)
    high = check_balance(g, 2 * bal, eps)
    assert high.decision == BalanceDecision.CERTIFIED_BALANCED
    high.certificate.verify(g)


@given(graphs(max_n=6))
def test_softened_graph_imbalance(g: DirectedGraph) -> None:
    alpha = 1.5
    bal, _ = brute_force_imbalance(softened(g, alpha))
    assert bal <= 4 * alpha * (1 + 1e-9)


@pytest.mark.parametrize("alpha,eps", [(0.5, 0.1), (2.0, 0.0), (2.0, 0.75), (2.0, math.nan)])
def test_check_balance_rejects_parameters(alpha: float, eps: float) -> None:
    with pytest.raises(RoutingFailure):
        check_balance(two_cycle(2.0, 1.0), alpha, eps)
