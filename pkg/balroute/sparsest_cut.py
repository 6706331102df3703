"""
Directed sparsest cut on unweighted simple graphs with an even number of
vertices, where the sparsity of S is w(S, V - S) / (|S| |V - S|).

A balance check first catches very lopsided cuts. Otherwise a cut-matching
game asks the flow solver to route bisection demands; a demand it cannot
route exposes a sparse cut, and the routed ones embed matchings that steer
the next bisection.
"""
from dataclasses import dataclass, field
import logging
import math
from typing import Callable, List, Optional, Protocol, Tuple

import numpy as np
import scipy.sparse as sp

from .balance_check import BalanceDecision, check_balance
from .error import RoutingFailure
from .graph import (
    Cut,
    DemandVector,
    DirectedGraph,
    Flow,
    congestion,
    cut_weight,
    flow_decomposition,
)
from .maxflow import build_approximator, min_congestion_route
from .oracles import exact_min_congestion

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RouterAnswer:
    flow: Flow
    congestion: float
    # a cut maximizing b_S / w(V - S, S), if the router found one
    cut: Optional[Cut]


Router = Callable[[DirectedGraph, DemandVector], RouterAnswer]


def approximate_router(eps: float = 0.5) -> Router:
    def route(g: DirectedGraph, b: DemandVector) -> RouterAnswer:
        result = min_congestion_route(g, b, eps, build_approximator(g))
        return RouterAnswer(result.flow, result.congestion, result.cut)

    return route


def exact_router(g: DirectedGraph, b: DemandVector) -> RouterAnswer:
    result = exact_min_congestion(g, b)
    return RouterAnswer(result.flow, congestion(g, result.flow), result.cut)


# One round's fractional matching between a bisection and its complement:
# (u, v, amount) triples, every vertex matched with total amount at most 1.
Matching = List[Tuple[int, int, float]]


class CutPlayer(Protocol):
    def bisection(self, n: int, matchings: List[Matching], rng: np.random.Generator) -> Cut:
        ...


class RandomProjectionPlayer:
    """
    Mixes a random vector through a lazy walk along every matching so far and
    splits the vertices at the median of the result. Vertices the matchings
    already connect well end up close together and fall on the same side.
    """

    def bisection(self, n: int, matchings: List[Matching], rng: np.random.Generator) -> Cut:
        x = rng.standard_normal(n)
        x -= x.mean()
        for matching in matchings:
            x = (x + _walk_matrix(n, matching) @ x) / 2
        order = np.argsort(x, kind="stable")
        return Cut(frozenset(int(v) for v in order[: n // 2]))


def _walk_matrix(n: int, matching: Matching) -> sp.csr_matrix:
    rows: List[int] = []
    cols: List[int] = []
    vals: List[float] = []
    matched = np.zeros(n)
    for u, v, amount in matching:
        rows += [u, v]
        cols += [v, u]
        vals += [amount, amount]
        matched[u] += amount
        matched[v] += amount
    rows += list(range(n))
    cols += list(range(n))
    vals += list(np.maximum(1.0 - matched, 0.0))
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def check_instance(g: DirectedGraph) -> None:
    if g.n % 2 != 0:
        raise RoutingFailure(f"Sparsest cut needs an even number of vertices, got {g.n}.")
    if not np.all(g.weights == 1.0):
        raise RoutingFailure("Sparsest cut needs an unweighted graph.")
    pairs = set(zip(g.tails.tolist(), g.heads.tolist()))
    if len(pairs) != g.m:
        raise RoutingFailure("Sparsest cut needs a simple graph; found parallel edges.")
    if not g.is_strongly_connected():
        raise RoutingFailure("Sparsest cut needs a strongly connected graph.")


def sparsity(g: DirectedGraph, cut: Cut) -> float:
    check_instance(g)
    if not 0 < len(cut) < g.n:
        raise RoutingFailure("Sparsity is defined for proper nonempty cuts only.")
    forward, _ = cut_weight(g, cut)
    return forward / (len(cut) * (g.n - len(cut)))


@dataclass(frozen=True)
class SparsityResult:
    # None when every bisection demand routed
    cut: Optional[Cut]
    sparsity: Optional[float]
    # "balance" when the imbalance check produced the cut, "game" otherwise
    source: str
    rounds: int
    routed_bisections: List[Cut] = field(default_factory=list)

    @property
    def found(self) -> bool:
        return self.cut is not None


def game_rounds(n: int) -> int:
    return 10 * math.ceil(math.log(n) ** 2)


def bisection_demand(n: int, side: Cut, amount: float) -> DemandVector:
    b = np.full(n, amount)
    b[list(side.members)] = -amount
    return b


def _matching(g: DirectedGraph, flow: Flow, amount: float, scale: float) -> Matching:
    return [
        (s, t, a / (amount * scale)) for s, t, a in flow_decomposition(g, flow) if s != t
    ]


def sparsest_cut(
    g: DirectedGraph,
    phi: float,
    rng: np.random.Generator,
    player: Optional[CutPlayer] = None,
    router: Optional[Router] = None,
    rounds: Optional[int] = None,
    eps: float = 0.1,
) -> SparsityResult:
    """
    Return a cut of sparsity at most phi, or the bisections whose demands all
    routed with congestion at most 1 as evidence that no cut is much sparser
    than phi.
    """
    if not 0 < phi <= 1:
        raise RoutingFailure(f"Sparsity target must lie in (0, 1], got {phi}.")
    check_instance(g)
    n = g.n
    player = player if player is not None else RandomProjectionPlayer()
    router = router if router is not None else approximate_router()
    rounds = rounds if rounds is not None else game_rounds(n)

    # A cut with w(S, V - S) > w(V - S, S) / phi makes V - S sparse, since
    # w(S, V - S) is at most |S| |V - S| in a simple unweighted graph.
    check = check_balance(g, 1 / ((1 - eps) * phi), eps)
    if check.decision == BalanceDecision.CERTIFIED_UNBALANCED:
        violating = check.certificate.violating_cut
        assert violating is not None
        cut = violating.complement(n)
        value = sparsity(g, cut)
        if value > phi:
            raise RoutingFailure(
                f"Imbalanced cut has sparsity {value} on its light side, above {phi}."
            )
        return SparsityResult(cut, value, "balance", 0)

    amount = n * phi / 4
    matchings: List[Matching] = []
    routed: List[Cut] = []
    for i in range(rounds):
        side = player.bisection(n, matchings, rng)
        if len(side) != n // 2:
            raise RoutingFailure(f"Cut player returned a set of size {len(side)}, not {n // 2}.")
        b = bisection_demand(n, side, amount)
        answer = router(g, b)
        if answer.congestion > 1:
            found = _sparse_side(g, answer, phi)
            if found is not None:
                logger.debug("cut-matching: sparse cut found in round %d", i + 1)
                return SparsityResult(found[0], found[1], "game", i + 1, routed)
        else:
            routed.append(side)
        matchings.append(_matching(g, answer.flow, amount, max(answer.congestion, 1.0)))
    logger.debug("cut-matching: %d of %d bisections routed", len(routed), rounds)
    return SparsityResult(None, None, "game", rounds, routed)


def _sparse_side(
    g: DirectedGraph, answer: RouterAnswer, phi: float
) -> Optional[Tuple[Cut, float]]:
    """A set T with b_T > w(V - T, T) makes V - T sparse; T itself is tried too."""
    if answer.cut is None:
        return None
    best: Optional[Tuple[Cut, float]] = None
    for side in (answer.cut.complement(g.n), answer.cut):
        if not 0 < len(side) < g.n:
            continue
        value = sparsity(g, side)
        if value <= phi and (best is None or value < best[1]):
            best = (side, value)
    return best
