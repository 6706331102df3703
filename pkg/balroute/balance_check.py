"""
Deciding bal(G) <= alpha approximately with the flow solver: either a
circulation with congestions in [1, alpha], or a cut whose forward weight
exceeds (1 - eps) alpha times its backward weight.
"""
from dataclasses import dataclass
import enum
import logging
from typing import Optional

import numpy as np

from .balance import BalanceCertificate, residual_degrees
from .error import RoutingFailure
from .graph import Cut, DirectedGraph, Edge, cut_weight, union
from .maxflow import CongestionRouting, build_approximator, min_congestion_route
from .options import ApproximatorKind

logger = logging.getLogger(__name__)

VERIFY_RETRIES = 4


class BalanceDecision(enum.Enum):
    CERTIFIED_BALANCED = "balanced"
    CERTIFIED_UNBALANCED = "unbalanced"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class BalanceCheck:
    decision: BalanceDecision
    certificate: BalanceCertificate
    # 1 for the coarse pass on the softened graph, 2 for the pass on G
    phase: int
    eps: float


def softened(g: DirectedGraph, alpha: float) -> DirectedGraph:
    """G plus its reverse scaled by 1 / (4 alpha); its imbalance is at most 4 alpha."""
    extra = tuple(Edge(e.head, e.tail, e.weight / (4 * alpha), e.length) for e in g.edges)
    return union(g, DirectedGraph(g.n, extra, check_strongly_connected=False))


def _ratio(g: DirectedGraph, cut: Cut) -> float:
    forward, backward = cut_weight(g, cut)
    return forward / backward


def _violating(g: DirectedGraph, cut: Optional[Cut], threshold: float) -> Optional[Cut]:
    """`cut` or its complement, whichever has ratio above threshold in g."""
    if cut is None or not 0 < len(cut) < g.n:
        return None
    for candidate in (cut, cut.complement(g.n)):
        if _ratio(g, candidate) > threshold:
            return candidate
    return None


def _route_deficits(
    g: DirectedGraph, eps: float, kind: ApproximatorKind, rng: Optional[np.random.Generator]
) -> CongestionRouting:
    return min_congestion_route(g, -residual_degrees(g), eps, build_approximator(g, kind, rng))


def check_balance(
    g: DirectedGraph,
    alpha: float,
    eps: float,
    kind: ApproximatorKind = ApproximatorKind.AUTO,
    rng: Optional[np.random.Generator] = None,
) -> BalanceCheck:
    """
    Never answers balanced when bal(G) > alpha, and never unbalanced when
    bal(G) <= (1 - eps) alpha. Both answers carry a certificate that is
    verified before returning.
    """
    if alpha < 1:
        raise RoutingFailure(f"Imbalance threshold must be at least 1, got {alpha}.")
    if not 0 < eps <= 0.5:
        raise RoutingFailure(f"Accuracy must lie in (0, 1/2], got {eps}.")
    threshold = (1 - eps) * alpha

    # Coarse pass: bal(G') <= 4 alpha keeps the approximator usable even when G
    # is far from balanced, and any cut of G' with ratio above 2 alpha has
    # ratio above alpha in G.
    h = softened(g, alpha)
    coarse = _route_deficits(h, 0.5, kind, rng)
    if coarse.congestion > 2 * alpha:
        cut = _violating(g, coarse.cut, threshold)
        if cut is not None:
            certificate = BalanceCertificate(threshold, violating_cut=cut)
            certificate.verify(g)
            logger.debug("check-balance: coarse pass found a cut of ratio %g", _ratio(g, cut))
            return BalanceCheck(BalanceDecision.CERTIFIED_UNBALANCED, certificate, 1, 0.5)

    current = eps
    for _ in range(VERIFY_RETRIES + 1):
        fine = _route_deficits(g, current, kind, rng)
        if 1 + fine.congestion <= alpha:
            circulation = np.array(g.weights) + fine.flow
            certificate = BalanceCertificate(alpha, circulation=circulation)
            certificate.verify(g)
            return BalanceCheck(BalanceDecision.CERTIFIED_BALANCED, certificate, 2, current)
        cut = _violating(g, fine.cut, threshold)
        if cut is not None:
            certificate = BalanceCertificate(threshold, violating_cut=cut)
            certificate.verify(g)
            return BalanceCheck(BalanceDecision.CERTIFIED_UNBALANCED, certificate, 2, current)
        logger.debug(
            "check-balance: congestion %g but no cut above %g at eps=%g, retrying",
            fine.congestion,
            threshold,
            current,
        )
        current /= 2
    raise RoutingFailure(
        f"Balance check found neither certificate after {VERIFY_RETRIES} refinements."
    )
