from typing import Dict

from hypothesis import given, settings
from hypothesis import strategies as st
import numpy as np
import pytest

from balroute.balance import imbalance_exact
from balroute.error import RoutingFailure
from balroute.generators import GENERATORS, Params, generate
from balroute.graph import incidence_apply


@settings(max_examples=10)
@given(st.sampled_from(sorted(GENERATORS)), st.integers(0, 2**16))
def test_generators_are_deterministic(kind: str, seed: int) -> None:
    params = {"n": "6"} if "n" in GENERATORS[kind].defaults else {}
    if kind == "mpx-counterexample":
        params = {"k": "1", "star": "3"}
    first = generate(kind, params, seed)
    second = generate(kind, params, seed)
    assert first.edges == second.edges
    assert first.is_strongly_connected() or kind == "lb-general"


@settings(max_examples=10)
@given(st.integers(2, 8), st.integers(0, 4), st.integers(0, 2**16))
def test_eulerian_cycles_are_balanced(n: int, cycles: int, seed: int) -> None:
    g = generate("eulerian-cycles", {"n": str(n), "cycles": str(cycles)}, seed)
    # every vertex sends out what it takes in
    assert np.allclose(incidence_apply(g, g.weights), 0.0)
    bal, _ = imbalance_exact(g)
    assert bal == pytest.approx(1.0)


def test_balanced_generator_stays_within_the_perturbation() -> None:
    g = generate("balanced", {"n": "6", "cycles": "2", "perturb": "0.5"}, 3)
    bal, _ = imbalance_exact(g)
    assert 1.0 - 1e-9 <= bal <= 1.5 + 1e-9


def test_fixed_shapes() -> None:
    assert generate("lb-general", {"k": "3"}, 0).n == 8
    mpx = generate("mpx-counterexample", {"k": "2", "star": "3"}, 0)
    assert mpx.n == 9 + 3
    assert mpx.m == 9 + 6
    # the arc into the star's center
    assert (mpx.tails[8], mpx.heads[8]) == (8, 0)
    star = generate("star", {"leaves": "4"}, 0)
    assert (star.n, star.m) == (5, 8)
    planted = generate("planted-cut", {"n": "6"}, 0)
    assert planted.m == 2 * 3 * 2 + 2


def test_random_graphs_respect_the_weight_range() -> None:
    g = generate("random", {"n": "7", "p": "0.5", "max_weight": "3"}, 11)
    assert g.is_strongly_connected()
    assert g.weights.min() >= 1.0 and g.weights.max() <= 3.0


@pytest.mark.parametrize(
    "kind,params,message",
    [
        ("cycle", {"size": "4"}, "cycle does not take size; it takes n, weight."),
        ("cycle", {"n": "1"}, "cycle: n must be at least 2, got 1."),
        ("cycle", {"n": "four"}, "cycle: n must be an integer, got four."),
        ("random", {"p": "1.5"}, r"random: p must lie in \[0.0, 1.0\], got 1.5."),
        ("planted-cut", {"n": "7"}, "planted-cut needs an even n, got 7."),
        ("torus", {}, "Unknown generator torus"),
    ],
)
def test_generator_errors(kind: str, params: Dict[str, str], message: str) -> None:
    with pytest.raises(RoutingFailure, match=message):
        generate(kind, params, 0)


def test_params_without_keys() -> None:
    with pytest.raises(RoutingFailure, match="it takes no parameters"):
        Params("empty", {"x": "1"}, {})
    p = Params("demo", {"a": "2.5"}, {"a": "1", "b": "3"})
    assert p.real("a") == 2.5
    assert p.integer("b") == 3
