from typing import Dict, List, Tuple

from hypothesis import strategies as st
import numpy as np

from balroute.graph import DemandVector, DirectedGraph, Edge


def _edges(n: int, weights: Dict[Tuple[int, int], float]) -> DirectedGraph:
    return DirectedGraph(n, tuple(Edge(u, v, w) for (u, v), w in sorted(weights.items())))


@st.composite
def graphs(
    draw: st.DrawFn,
    min_n: int = 2,
    max_n: int = 7,
    max_weight: int = 6,
    density: float = 0.3,
) -> DirectedGraph:
    """Strongly connected digraphs: a Hamiltonian cycle plus random arcs, integer weights."""
    n = draw(st.integers(min_n, max_n))
    order = draw(st.permutations(list(range(n))))
    arcs = {(u, v) for u, v in zip(order, order[1:] + order[:1])}
    for u in range(n):
        for v in range(n):
            if u != v and (u, v) not in arcs and draw(st.floats(0, 1)) < density:
                arcs.add((u, v))
    weight = st.integers(1, max_weight).map(float)
    return _edges(n, {arc: draw(weight) for arc in sorted(arcs)})


@st.composite
def eulerian_graphs(
    draw: st.DrawFn, min_n: int = 2, max_n: int = 7, max_cycles: int = 3
) -> DirectedGraph:
    """Sums of weighted simple cycles over a spanning cycle."""
    n = draw(st.integers(min_n, max_n))
    weights: Dict[Tuple[int, int], float] = {}
    cycles: List[List[int]] = [draw(st.permutations(list(range(n))))]
    for _ in range(draw(st.integers(0, max_cycles))):
        members = draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=n, unique=True))
        cycles.append(members)
    for cycle in cycles:
        w = float(draw(st.integers(1, 5)))
        for u, v in zip(cycle, cycle[1:] + cycle[:1]):
            weights[(u, v)] = weights.get((u, v), 0.0) + w
    return _edges(n, weights)


@st.composite
def demands(draw: st.DrawFn, n: int, bound: int = 5) -> DemandVector:
    """Nonzero integer demands summing to zero."""
    values = draw(st.lists(st.integers(-bound, bound), min_size=n - 1, max_size=n - 1))
    values.append(-sum(values))
    b = np.array(values, dtype=np.float64)
    if not b.any():
        b[0], b[-1] = -1.0, 1.0
    return b


@st.composite
def graphs_with_demand(
    draw: st.DrawFn, min_n: int = 2, max_n: int = 7
) -> Tuple[DirectedGraph, DemandVector]:
    g = draw(graphs(min_n=min_n, max_n=max_n))
    return g, draw(demands(g.n))
