"""
Instance families for the command line, the tests and the experiment harness.
Every generator takes `key=value` string parameters and a seed, and returns
the same graph for the same inputs.
"""
from dataclasses import dataclass
import math
from typing import Callable, Dict, List, Mapping, Tuple

import numpy as np

from .balance import residual_graph
from .error import RoutingFailure
from .graph import DirectedGraph, Edge
from .lower_bounds import gen_lowerbound_eulerian, gen_lowerbound_general
from .oracles import exact_max_flow
from .trials import make_rng


class Params:
    """Typed access to string parameters; unknown keys are an error."""

    def __init__(self, kind: str, raw: Mapping[str, str], defaults: Mapping[str, str]) -> None:
        unknown = sorted(set(raw) - set(defaults))
        if unknown:
            raise RoutingFailure(
                f"{kind} does not take {', '.join(unknown)}; "
                f"it takes {', '.join(sorted(defaults)) or 'no parameters'}."
            )
        self.kind = kind
        self.values = {**defaults, **raw}

    def integer(self, key: str, minimum: int = 1) -> int:
        try:
            value = int(self.values[key])
        except ValueError:
            raise RoutingFailure(f"{self.kind}: {key} must be an integer, got {self.values[key]}.")
        if value < minimum:
            raise RoutingFailure(f"{self.kind}: {key} must be at least {minimum}, got {value}.")
        return value

    def real(self, key: str, low: float = 0.0, high: float = math.inf) -> float:
        try:
            value = float(self.values[key])
        except ValueError:
            raise RoutingFailure(f"{self.kind}: {key} must be a number, got {self.values[key]}.")
        if not low <= value <= high:
            raise RoutingFailure(f"{self.kind}: {key} must lie in [{low}, {high}], got {value}.")
        return value


def _merged(n: int, weights: Dict[Tuple[int, int], float]) -> DirectedGraph:
    return DirectedGraph(n, tuple(Edge(u, v, w) for (u, v), w in sorted(weights.items())))


def _add_cycle(weights: Dict[Tuple[int, int], float], cycle: List[int], w: float) -> None:
    for u, v in zip(cycle, cycle[1:] + cycle[:1]):
        weights[(u, v)] = weights.get((u, v), 0.0) + w


def cycle(p: Params, rng: np.random.Generator) -> DirectedGraph:
    n = p.integer("n", 2)
    w = p.real("weight", 1e-12)
    return DirectedGraph(n, tuple(Edge(i, (i + 1) % n, w) for i in range(n)))


def eulerian_cycles(p: Params, rng: np.random.Generator) -> DirectedGraph:
    """A spanning cycle plus random simple cycles, each with its own weight."""
    n = p.integer("n", 2)
    count = p.integer("cycles", 0)
    max_weight = p.real("max_weight", 1.0)
    weights: Dict[Tuple[int, int], float] = {}
    _add_cycle(weights, [int(v) for v in rng.permutation(n)], float(rng.uniform(1.0, max_weight)))
    for _ in range(count):
        length = int(rng.integers(2, n + 1))
        members = [int(v) for v in rng.choice(n, size=length, replace=False)]
        _add_cycle(weights, members, float(rng.uniform(1.0, max_weight)))
    return _merged(n, weights)


def balanced(p: Params, rng: np.random.Generator) -> DirectedGraph:
    """An Eulerian graph with every weight scaled by a factor in [1, 1 + perturb]."""
    n = p.integer("n", 2)
    count = p.integer("cycles", 0)
    perturb = p.real("perturb", 0.0)
    base = eulerian_cycles(
        Params("eulerian-cycles", {"n": str(n), "cycles": str(count)}, EULERIAN_DEFAULTS), rng
    )
    factors = rng.uniform(1.0, 1.0 + perturb, size=base.m)
    return base.with_weights(base.weights * factors)


def random_graph(p: Params, rng: np.random.Generator) -> DirectedGraph:
    """A random Hamiltonian cycle plus each other arc with probability p."""
    n = p.integer("n", 2)
    prob = p.real("p", 0.0, 1.0)
    max_weight = p.real("max_weight", 1.0)
    weights: Dict[Tuple[int, int], float] = {}
    _add_cycle(weights, [int(v) for v in rng.permutation(n)], 0.0)
    for u in range(n):
        for v in range(n):
            if u != v and (u, v) not in weights and rng.random() < prob:
                weights[(u, v)] = 0.0
    for key in sorted(weights):
        weights[key] = float(rng.uniform(1.0, max_weight))
    return _merged(n, weights)


def bidirected(p: Params, rng: np.random.Generator) -> DirectedGraph:
    """Random undirected graph containing a path through all vertices, as a symmetric digraph."""
    n = p.integer("n", 2)
    prob = p.real("p", 0.0, 1.0)
    order = [int(v) for v in rng.permutation(n)]
    pairs = {(min(u, v), max(u, v)) for u, v in zip(order, order[1:])}
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < prob:
                pairs.add((u, v))
    weights: Dict[Tuple[int, int], float] = {}
    for u, v in pairs:
        weights[(u, v)] = weights[(v, u)] = 1.0
    return _merged(n, weights)


def planted_cut(p: Params, rng: np.random.Generator) -> DirectedGraph:
    """Two unit bidirected cliques on halves 0..n/2-1 and n/2..n-1, joined by one 2-cycle."""
    n = p.integer("n", 4)
    if n % 2:
        raise RoutingFailure(f"planted-cut needs an even n, got {n}.")
    half = n // 2
    weights: Dict[Tuple[int, int], float] = {}
    for block in (range(half), range(half, n)):
        for u in block:
            for v in block:
                if u != v:
                    weights[(u, v)] = 1.0
    weights[(0, half)] = weights[(half, 0)] = 1.0
    return _merged(n, weights)


def complete(p: Params, rng: np.random.Generator) -> DirectedGraph:
    n = p.integer("n", 2)
    return _merged(n, {(u, v): 1.0 for u in range(n) for v in range(n) if u != v})


def star(p: Params, rng: np.random.Generator) -> DirectedGraph:
    """Center 0 joined both ways to every leaf."""
    leaves = p.integer("leaves", 1)
    weights: Dict[Tuple[int, int], float] = {}
    for leaf in range(1, leaves + 1):
        weights[(0, leaf)] = weights[(leaf, 0)] = 1.0
    return _merged(leaves + 1, weights)


def mpx_counterexample(p: Params, rng: np.random.Generator) -> DirectedGraph:
    """
    A directed cycle 0 -> 1 -> ... -> 3^k - 1 -> 0 with `star` leaves attached
    both ways to vertex 0. Cycle edges come first, so edge 3^k - 1 is the arc
    into the star's center.
    """
    k = p.integer("k", 1)
    leaves = p.integer("star", 0)
    length = 3**k
    edges = [Edge(i, (i + 1) % length, 1.0) for i in range(length)]
    for leaf in range(length, length + leaves):
        edges += [Edge(0, leaf, 1.0), Edge(leaf, 0, 1.0)]
    return DirectedGraph(length + leaves, tuple(edges))


def lb_general(p: Params, rng: np.random.Generator) -> DirectedGraph:
    return gen_lowerbound_general(p.integer("k", 1))


def lb_eulerian(p: Params, rng: np.random.Generator) -> DirectedGraph:
    return gen_lowerbound_eulerian(p.integer("n", 2))


def residual(p: Params, rng: np.random.Generator) -> DirectedGraph:
    """
    Residual graph of a (1 - eps) fraction of a maximum 0 -> n-1 flow on a
    random unit-capacity undirected graph.
    """
    eps = p.real("eps", 1e-9, 1.0)
    shape = {key: value for key, value in p.values.items() if key != "eps"}
    base = bidirected(Params("bidirected", shape, BIDIRECTED_DEFAULTS), rng)
    _, flow, _ = exact_max_flow(base, 0, base.n - 1)
    return residual_graph(base, (1 - eps) * flow)


EULERIAN_DEFAULTS = {"n": "10", "cycles": "3", "max_weight": "4"}
BIDIRECTED_DEFAULTS = {"n": "10", "p": "0.3"}


@dataclass(frozen=True)
class GeneratorInfo:
    build: Callable[[Params, np.random.Generator], DirectedGraph]
    defaults: Dict[str, str]
    description: str


GENERATORS: Dict[str, GeneratorInfo] = {
    "cycle": GeneratorInfo(cycle, {"n": "8", "weight": "1"}, "directed n-cycle"),
    "eulerian-cycles": GeneratorInfo(
        eulerian_cycles, EULERIAN_DEFAULTS, "sum of random weighted cycles"
    ),
    "balanced": GeneratorInfo(
        balanced,
        {"n": "10", "cycles": "3", "perturb": "0.5"},
        "Eulerian graph with perturbed weights",
    ),
    "random": GeneratorInfo(
        random_graph, {"n": "10", "p": "0.3", "max_weight": "4"}, "random strongly connected digraph"
    ),
    "bidirected": GeneratorInfo(bidirected, BIDIRECTED_DEFAULTS, "random unit undirected graph"),
    "planted-cut": GeneratorInfo(planted_cut, {"n": "12"}, "two cliques joined by a 2-cycle"),
    "complete": GeneratorInfo(complete, {"n": "6"}, "complete unit digraph"),
    "star": GeneratorInfo(star, {"leaves": "5"}, "undirected star"),
    "mpx-counterexample": GeneratorInfo(
        mpx_counterexample, {"k": "2", "star": "64"}, "cycle of length 3^k with a star"
    ),
    "lb-general": GeneratorInfo(lb_general, {"k": "3"}, "general lower-bound instance"),
    "lb-eulerian": GeneratorInfo(lb_eulerian, {"n": "9"}, "Eulerian lower-bound instance"),
    "residual": GeneratorInfo(
        residual, {**BIDIRECTED_DEFAULTS, "eps": "0.5"}, "residual of an approximate max flow"
    ),
}


def generate(kind: str, params: Mapping[str, str], seed: int) -> DirectedGraph:
    info = GENERATORS.get(kind)
    if info is None:
        raise RoutingFailure(
            f"Unknown generator {kind}; choose one of {', '.join(sorted(GENERATORS))}."
        )
    return info.build(Params(kind, params, info.defaults), make_rng(seed))
