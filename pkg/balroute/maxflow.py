"""
Approximate minimum-congestion routing and maximum flow on balanced digraphs
by gradient descent on

    phi(f) = ||C^-1 f||_inf + lmax(2 alpha R (b - Bf))

where R is a congestion approximator of quality alpha. Flows and demands are
rescaled while the solver runs; every RouteResult carries the factor so that
callers can map results back.
"""
from dataclasses import dataclass, replace
import logging
import math
from typing import Callable, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .approximator import CongestionApproximator
from .arborescence import Arborescence
from .balance import undirectedize
from .composite import CompositeProblem, minimize
from .error import RoutingFailure, static_assert_unreachable
from .graph import (
    Cut,
    DemandVector,
    DirectedGraph,
    Flow,
    Vector,
    check_demand,
    congestion,
    cut_weight,
    incidence_apply,
    threshold_cut,
    unit_demand,
)
from .options import ApproximatorKind
from .oracles import all_cuts_congestion_approximator, exact_min_congestion
from .routing import find_routing, route_residual
from .trials import make_rng

logger = logging.getLogger(__name__)

ALL_CUTS_LIMIT = 16
QUALITY_SAMPLES = 32
# Upper limit on composite steps in one fast almost-route.
COMPOSITE_STEP_LIMIT = 2000
# Doublings tried per line search.
MAX_DOUBLINGS = 60


def lmax(x: Vector) -> float:
    """ln sum_i (e^{x_i} + e^{-x_i}), evaluated without overflow."""
    top = float(np.abs(x).max(initial=0.0))
    total = float(np.exp(x - top).sum() + np.exp(-x - top).sum())
    return top + math.log(total)


def lmax_grad(x: Vector) -> Vector:
    top = float(np.abs(x).max(initial=0.0))
    plus = np.exp(x - top)
    minus = np.exp(-x - top)
    grad: Vector = (plus - minus) / float(plus.sum() + minus.sum())
    return grad


def log_term(n: int, rows: int) -> float:
    """
    The ln n of the step and scale constants. It is raised to ln(2 rows) / 4
    when the approximator has more rows than that covers, since the softmax
    slack ln(2 rows) must stay within a quarter of the scale.
    """
    return max(math.log(max(n, 2)), math.log(2 * max(rows, 1)) / 4)


@dataclass(frozen=True)
class RouteResult:
    # In scaled units: flow approximately routes `demand` = scale * b.
    flow: Flow
    potentials: Vector
    primal: float
    dual: float
    scale: float
    demand: DemandVector
    iterations: int = 0
    descent_steps: int = 0
    scalings: int = 0
    warm_iterations: int = 0
    composite_steps: int = 0

    @property
    def gap(self) -> float:
        return self.primal / self.dual if self.dual > 0 else math.inf

    def congestion_bounds(self) -> Tuple[float, float]:
        """Bounds on OPT_b for the caller's unscaled demand."""
        return self.dual / self.scale, self.primal / self.scale


@dataclass(frozen=True)
class _State:
    flow_term: float
    smooth: float
    potentials: Vector
    grad: Vector

    @property
    def phi(self) -> float:
        return self.flow_term + self.smooth


class _Potential:
    def __init__(self, g: DirectedGraph, approx: CongestionApproximator, alpha: float) -> None:
        self.g = g
        self.approx = approx
        self.alpha = alpha

    def state(self, f: Flow, b: DemandVector) -> _State:
        g = self.g
        x = 2 * self.alpha * self.approx.apply(b - incidence_apply(g, f))
        v = self.approx.apply_transpose(lmax_grad(x))
        grad = -2 * self.alpha * (v[g.heads] - v[g.tails])
        return _State(float((f / g.weights).max(initial=0.0)), lmax(x), v, grad)

    def smooth(self, f: Flow, b: DemandVector) -> float:
        return lmax(2 * self.alpha * self.approx.apply(b - incidence_apply(self.g, f)))

    def gradient(self, f: Flow, b: DemandVector) -> Vector:
        return self.state(f, b).grad

    def scale_value(self, f: Flow, b: DemandVector) -> float:
        residual = self.approx.norm(b - incidence_apply(self.g, f))
        return float((f / self.g.weights).max(initial=0.0)) + 2 * self.alpha * residual


def dual_value(g: DirectedGraph, b: DemandVector, v: Vector) -> float:
    """b^T v / ||C max(B^T v, 0)||_1, a lower bound on OPT_b."""
    numerator = float(np.dot(b, v))
    denominator = float(np.dot(g.weights, np.maximum(v[g.heads] - v[g.tails], 0.0)))
    if denominator <= 0:
        return 0.0 if numerator <= 0 else math.inf
    return numerator / denominator


def _check_eps(eps: float) -> None:
    if not 0 < eps <= 0.5:
        raise RoutingFailure(f"Accuracy must lie in (0, 1/2], got {eps}.")


def almost_route_directed(
    g: DirectedGraph,
    approx: CongestionApproximator,
    b: DemandVector,
    eps: float,
    f0: Optional[Flow] = None,
    alpha: Optional[float] = None,
    max_iterations: Optional[int] = None,
) -> RouteResult:
    _check_eps(eps)
    check_demand(g, b)
    alpha = approx.quality if alpha is None else alpha
    if alpha < 1:
        raise RoutingFailure(f"Approximator quality must be at least 1, got {alpha}.")
    f = np.zeros(g.m) if f0 is None else np.array(f0, dtype=np.float64)
    if f.shape != (g.m,) or f.min(initial=0.0) < 0:
        raise RoutingFailure("The starting flow must be nonnegative and aligned to the edges.")
    b = np.array(b, dtype=np.float64)
    if not np.abs(b).max(initial=0.0) > 0:
        return RouteResult(np.zeros(g.m), np.zeros(g.n), 0.0, 0.0, 1.0, b)

    potential = _Potential(g, approx, alpha)
    log_n = log_term(g.n, approx.rows)
    delta = eps / (10 * alpha**2)
    min_decrease = eps**2 / (200 * alpha**2)

    scale = 20 * log_n / (eps * potential.scale_value(f, b))
    f *= scale
    b = b * scale
    state = potential.state(f, b)
    start_dual = dual_value(g, b, state.potentials)
    eps0 = max(state.phi / start_dual - 1, eps) if start_dual > 0 else 4 * alpha
    limit = max_iterations
    if limit is None:
        limit = math.ceil(
            4000 * alpha**2 * log_n / eps**3 * (1 + math.log1p(eps0) / math.log(17 / 16))
        )

    iterations = descent_steps = scalings = 0
    while True:
        if iterations >= limit:
            raise RoutingFailure(
                f"Almost-route did not terminate in {limit} iterations; "
                f"the approximator quality {alpha} is probably understated."
            )
        iterations += 1
        if state.phi < 16 * log_n / eps:
            f *= 17 / 16
            b *= 17 / 16
            scale *= 17 / 16
            scalings += 1
            state = potential.state(f, b)
            continue

        move: Optional[Callable[[float], Flow]] = None
        reach = math.inf
        grows = np.where(state.grad < 0, g.weights, 0.0)
        if -float(np.dot(state.grad, grows)) > 1 + eps / 4:
            start = f
            move = lambda t: start + t * grows
        elif state.flow_term > 0 and (
            state.flow_term + float(np.dot(state.grad, f)) > eps / 4 * state.flow_term
        ):
            # Shrink by t in the ||C^-1 .||_inf norm.
            start, reach = f, state.flow_term
            move = lambda t: start * (1 - t / reach)
        if move is None:
            break

        t = delta
        step = move(t)
        new_state = potential.state(step, b)
        # Double t while phi keeps dropping; never worse than the delta step.
        for _ in range(MAX_DOUBLINGS):
            if 2 * t >= reach:
                break
            trial = move(2 * t)
            trial_state = potential.state(trial, b)
            if trial_state.phi >= new_state.phi:
                break
            t, step, new_state = 2 * t, trial, trial_state
        decrease = state.phi - new_state.phi
        if decrease < min_decrease - 1e-12 * state.phi:
            raise RoutingFailure(
                f"Almost-route step decreased phi by {decrease}, less than {min_decrease}."
            )
        f, state = step, new_state
        descent_steps += 1

    dual = dual_value(g, b, state.potentials)
    if state.phi > (1 + eps) * dual * (1 + 1e-9):
        raise RoutingFailure(
            f"Almost-route certificate failed: phi {state.phi} exceeds (1 + {eps}) x dual {dual}."
        )
    logger.debug(
        "almost-route eps=%g: %d iterations, %d descent steps, %d scalings, gap %g",
        eps,
        iterations,
        descent_steps,
        scalings,
        state.phi / dual,
    )
    return RouteResult(
        f, state.potentials, state.phi, dual, scale, b, iterations, descent_steps, scalings
    )


def proximal_step(
    g: DirectedGraph,
    grad: Vector,
    f_k: Flow,
    smoothness: float,
    box: float,
    tolerance: float = 1e-9,
) -> Flow:
    """
    argmin over f with 0 <= f_e / w_e <= box of

        grad^T f + (smoothness / 2) ||C^-1 (f - f_k)||_inf^2 + ||C^-1 f||_inf

    For a fixed radius z = ||C^-1 (f - f_k)||_inf the problem is piecewise
    linear in the level t = ||C^-1 f||_inf and is solved by sorting
    breakpoints; the radius is found by golden-section search.
    """
    w = g.weights
    if f_k.shape != (g.m,) or f_k.min(initial=0.0) < -1e-12 or np.any(
        f_k > box * w * (1 + 1e-12)
    ):
        raise RoutingFailure("The proximal step needs a starting flow inside the box.")
    negative = grad < 0
    zero = grad == 0

    def inner(z: float) -> Tuple[float, Flow]:
        lo = np.maximum(0.0, f_k - z * w)
        hi = np.minimum(box * w, f_k + z * w)
        level = float((lo / w).max(initial=0.0))
        breaks = hi[negative] / w[negative]
        coefs = grad[negative] * w[negative]
        alive = breaks > level
        slope = 1.0 + float(coefs[alive].sum())
        if slope < 0:
            order = np.argsort(breaks[alive], kind="stable")
            slopes = slope - np.cumsum(coefs[alive][order])
            level = float(breaks[alive][order][int(np.argmax(slopes >= 0))])
        f = np.array(lo)
        f[negative] = np.minimum(hi[negative], level * w[negative])
        f[zero] = np.clip(f_k[zero], lo[zero], np.minimum(hi[zero], level * w[zero]))
        value = float((f / w).max(initial=0.0)) + float(np.dot(grad, f))
        return smoothness / 2 * z * z + value, f

    ratio = (math.sqrt(5) - 1) / 2
    a, d = 0.0, box
    b_, c_ = d - ratio * (d - a), a + ratio * (d - a)
    fb, fc = inner(b_), inner(c_)
    best = min([inner(0.0), inner(box), fb, fc], key=lambda pair: pair[0])
    while d - a > tolerance * max(1.0, box):
        if fb[0] <= fc[0]:
            d, c_, fc = c_, b_, fb
            b_ = d - ratio * (d - a)
            fb = inner(b_)
            candidate = fb
        else:
            a, b_, fb = b_, c_, fc
            c_ = a + ratio * (d - a)
            fc = inner(c_)
            candidate = fc
        if candidate[0] < best[0]:
            best = candidate
    return best[1]


def fast_almost_route(
    g: DirectedGraph,
    approx: CongestionApproximator,
    b: DemandVector,
    eps: float,
    alpha: Optional[float] = None,
) -> RouteResult:
    """
    Warm start at accuracy 1/2, ceil(alpha^2 / eps^2) composite steps on the
    warm start's scale (at most COMPOSITE_STEP_LIMIT), then a final
    almost-route polish at accuracy eps.
    """
    _check_eps(eps)
    alpha = approx.quality if alpha is None else alpha
    warm = almost_route_directed(g, approx, b, 0.5, alpha=alpha)
    if warm.primal == 0:
        return warm
    potential = _Potential(g, approx, alpha)
    demand = warm.demand
    box = 50 * log_term(g.n, approx.rows) / eps
    steps = min(math.ceil(alpha**2 / eps**2), COMPOSITE_STEP_LIMIT)
    smoothness = 4 * alpha**2
    w = g.weights

    def psi(f: Flow) -> float:
        if f.min(initial=0.0) < -1e-12 or np.any(f > box * w * (1 + 1e-12)):
            return math.inf
        return float((f / w).max(initial=0.0))

    problem = CompositeProblem(
        smooth=lambda f: potential.smooth(f, demand),
        gradient=lambda f: potential.gradient(f, demand),
        nonsmooth=psi,
        prox=lambda f, grad: proximal_step(g, grad, f, smoothness, box),
        smoothness=smoothness,
        diameter=box,
        x0=np.clip(warm.flow, 0.0, box * w),
    )
    trajectory = minimize(problem, steps)
    if not trajectory.is_monotone():
        raise RoutingFailure("Composite descent increased phi.")
    polished = almost_route_directed(g, approx, demand, eps, trajectory.final, alpha)
    logger.debug(
        "fast almost-route: warm %d iterations, %d composite steps, polish %d iterations",
        warm.iterations,
        steps,
        polished.iterations,
    )
    return replace(
        polished,
        scale=warm.scale * polished.scale,
        warm_iterations=warm.iterations,
        composite_steps=steps,
    )


@dataclass(frozen=True)
class CongestionRouting:
    # Exactly routes the caller's b.
    flow: Flow
    congestion: float
    cut: Optional[Cut]
    # b_S / w(V - S, S) of the cut, a lower bound on OPT_b.
    cut_ratio: float
    primal_bound: float
    dual_bound: float
    recovery_rounds: int
    iterations: int


def min_congestion_route(
    g: DirectedGraph,
    b: DemandVector,
    eps: float,
    approximator: Optional[CongestionApproximator] = None,
    fast: bool = True,
    max_rounds: int = 8,
) -> CongestionRouting:
    """
    A flow routing b exactly with congestion at most (1 + eps) OPT_b, and a
    threshold cut certifying the lower bound. The solver runs at eps / 3;
    what it leaves unrouted is solved again, and the last residue is sent
    through the widest arborescences once that costs at most eps / 10 of the
    main flow's congestion.
    """
    _check_eps(eps)
    check_demand(g, b)
    if not np.abs(b).max(initial=0.0) > 0:
        return CongestionRouting(np.zeros(g.m), 0.0, None, 0.0, 0.0, 0.0, 0, 0)
    approx = approximator if approximator is not None else build_approximator(g)
    inner_eps = eps / 3

    def solve(demand: DemandVector) -> RouteResult:
        if fast:
            return fast_almost_route(g, approx, demand, inner_eps)
        return almost_route_directed(g, approx, demand, inner_eps)

    first = solve(b)
    flow = first.flow / first.scale
    iterations = first.iterations + first.warm_iterations
    main = congestion(g, flow)
    rounds = 0
    while True:
        residual = b - incidence_apply(g, flow)
        if not np.abs(residual).max(initial=0.0) > 0:
            break
        crude = route_residual(g, residual)
        if congestion(g, crude) <= eps / 10 * main or rounds >= max_rounds:
            flow = flow + crude
            break
        step = solve(residual)
        flow = flow + step.flow / step.scale
        iterations += step.iterations + step.warm_iterations
        rounds += 1

    lower, upper = first.congestion_bounds()
    best = threshold_cut(g, first.potentials, b)
    logger.debug(
        "min-congestion route: congestion %g, cut ratio %g, %d recovery rounds",
        congestion(g, flow),
        best.ratio,
        rounds,
    )
    return CongestionRouting(
        flow, congestion(g, flow), best.cut, best.ratio, upper, lower, rounds, iterations
    )


@dataclass(frozen=True)
class MaxFlowResult:
    value: float
    flow: Flow
    # source side of the cut
    cut: Cut
    cut_capacity: float
    routing: CongestionRouting


def max_st_flow(
    g: DirectedGraph,
    s: int,
    t: int,
    eps: float,
    approximator: Optional[CongestionApproximator] = None,
) -> MaxFlowResult:
    """
    OPT for the unit s-t demand is 1 / maxflow, so one (1 + eps) routing of
    it, divided by its congestion, is a feasible flow of value at least
    maxflow / (1 + eps), and the certifying cut has capacity at most
    (1 + eps) maxflow. Congestion scales linearly with the demand, so this
    single solve replaces a binary search over the flow value.
    """
    if s == t:
        raise RoutingFailure("Source and sink must differ.")
    if not (0 <= s < g.n and 0 <= t < g.n):
        raise RoutingFailure(f"({s}, {t}) is not a pair of vertices.")
    result = min_congestion_route(g, unit_demand(g.n, s, t), eps, approximator)
    assert result.cut is not None
    source_side = result.cut.complement(g.n)
    capacity, _ = cut_weight(g, source_side)
    return MaxFlowResult(
        1.0 / result.congestion,
        result.flow / result.congestion,
        source_side,
        capacity,
        result,
    )


def _subtrees(tree: Arborescence) -> List[List[int]]:
    members: List[List[int]] = [[v] for v in range(tree.n)]
    for v in reversed(tree.order):
        if v != tree.root:
            members[tree.parent[v]].extend(members[v])
    return members


@dataclass(frozen=True)
class QualityReport:
    # extremes of OPT_b / ||Rb||_inf over the sampled demands
    lower: float
    upper: float
    samples: int


def measure_quality(
    g: DirectedGraph,
    approx: CongestionApproximator,
    samples: int,
    rng: np.random.Generator,
) -> QualityReport:
    """Compare ||Rb|| with the exact OPT_b on unit pairs and random demands."""
    if samples < 1:
        raise RoutingFailure("Need at least one sample.")
    ratios: List[float] = []
    for i in range(samples):
        if i % 2 == 0 and g.n > 1:
            s, t = rng.choice(g.n, size=2, replace=False)
            b = unit_demand(g.n, int(s), int(t))
        else:
            b = rng.standard_normal(g.n)
            b -= b.mean()
        norm = approx.norm(b)
        if norm == 0:
            continue
        ratios.append(exact_min_congestion(g, b).value / norm)
    if not ratios:
        raise RoutingFailure("Every sampled demand was zero.")
    return QualityReport(min(ratios), max(ratios), len(ratios))


def tree_congestion_approximator(
    g: DirectedGraph,
    rng: np.random.Generator,
    samples: int = QUALITY_SAMPLES,
) -> CongestionApproximator:
    """
    Rows are subtree indicators of the arborescences of an oblivious routing on
    the undirected copy, each scaled by the undirected capacity of its cut.
    That keeps ||Rb|| below OPT_b; the quality is measured against the exact
    oracle on sampled demands.
    """
    h = undirectedize(g)
    routing = find_routing(h, 0, rng)
    rows: List[int] = []
    cols: List[int] = []
    vals: List[float] = []
    row = 0
    for tree in routing.trees:
        for v, members in enumerate(_subtrees(tree)):
            if v == tree.root:
                continue
            capacity, _ = cut_weight(h, Cut(frozenset(members)))
            rows += [row] * len(members)
            cols += members
            vals += [1.0 / capacity] * len(members)
            row += 1
    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(row, g.n))
    report = measure_quality(g, CongestionApproximator(matrix, 1.0, "tree"), samples, rng)
    if report.lower < 1 - 1e-7:
        raise RoutingFailure(f"Tree approximator overestimates a demand by {1 / report.lower}.")
    logger.debug("tree approximator: %d rows, measured quality %g", row, report.upper)
    return CongestionApproximator(matrix, max(1.0, report.upper), "tree")


def build_approximator(
    g: DirectedGraph,
    kind: ApproximatorKind = ApproximatorKind.AUTO,
    rng: Optional[np.random.Generator] = None,
) -> CongestionApproximator:
    if not g.is_strongly_connected():
        raise RoutingFailure("Congestion approximators need a strongly connected graph.")
    if kind == ApproximatorKind.AUTO:
        kind = ApproximatorKind.ALL_CUTS if g.n <= ALL_CUTS_LIMIT else ApproximatorKind.TREE
    if kind == ApproximatorKind.ALL_CUTS:
        return all_cuts_congestion_approximator(g)
    elif kind == ApproximatorKind.TREE:
        return tree_congestion_approximator(g, rng if rng is not None else make_rng(0))
    else:
        static_assert_unreachable(kind)
