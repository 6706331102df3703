"""
The Monte-Carlo harness: an experiment spec names an instance family, the
experiment to run on it, its settings and an explicit list of seeds. Every
seed yields one row of metrics; the rows are aggregated and checked against
fixed bounds and, for fitted constants, against a stored baseline.
"""
from dataclasses import dataclass, field
import datetime
import enum
import json
import logging
import math
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .arborescence import find_arborescence, load, stretch_summary, total_stretch
from .balance import imbalance_exact, residual_degrees
from .balance_check import BalanceDecision, check_balance
from .composite import (
    CompositeProblem,
    box_indicator,
    convergence_bound,
    euclidean_box_prox,
    minimize,
)
from .decomposition import cluster_directed, cycle_cut_statistic, edge_cut_probability
from .error import RoutingFailure
from .generators import GENERATORS, Params, generate
from .graph import DirectedGraph, Vector, shortest_paths, unit_demand, volume
from .lower_bounds import LowerBoundKind, lowerbound_certificate, proven_bound, random_path_routing
from .maxflow import (
    almost_route_directed,
    build_approximator,
    fast_almost_route,
    max_st_flow,
)
from .options import ToleranceProfile
from .oracles import brute_force_imbalance, exact_max_flow, exact_min_congestion
from .routing import (
    MAX_EXACT_RATIO_VERTICES,
    competitive_ratio,
    find_routing,
    single_source_demands,
    worst_case_competitive_ratio,
)
from .sparsest_cut import exact_router, sparsest_cut, sparsity
from .trials import make_rng, map_trials

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Trial:
    graph: Optional[DirectedGraph]
    generator: Optional[str]
    params: Dict[str, str]
    settings: Params
    rng: np.random.Generator

    @property
    def g(self) -> DirectedGraph:
        if self.graph is None:
            raise RoutingFailure("This experiment needs a generator.")
        return self.graph


Metrics = Dict[str, float]


def _log_n(g: DirectedGraph) -> float:
    return math.log(max(g.n, 2))


def run_decomposition_cut(t: Trial) -> Metrics:
    g = t.g
    r = t.settings.real("r", 1e-12)
    partition = cluster_directed(g, r, t.rng)
    partition.verify(g)
    scale = volume(g) * _log_n(g) / r
    abal = float(np.maximum(-residual_degrees(g), 0.0).sum())
    return {
        "cut_weight": partition.cut_weight,
        "constant": partition.cut_weight / scale,
        "with_abal": partition.cut_weight / (scale + abal * _log_n(g)),
        "clusters": float(partition.cluster_count),
        "attempts": float(partition.attempts),
    }


def _some_cycle(g: DirectedGraph) -> List[int]:
    """A shortest path from 0 to the tail of an edge into 0, closed by that edge."""
    e = g.in_edges[0][0]
    paths = shortest_paths(g, 0)
    cycle = [0]
    for edge in paths.path_to(int(g.tails[e])):
        cycle.append(int(g.heads[edge]))
    return cycle


def run_cycle_cut(t: Trial) -> Metrics:
    g = t.g
    stat = cycle_cut_statistic(
        g,
        t.settings.real("r", 1e-12),
        _some_cycle(g),
        t.settings.integer("trials"),
        t.rng,
        redraw=bool(t.settings.integer("redraw", 0)),
    )
    return {"constant": stat.mean, "variance": stat.variance, "cut_fraction": stat.mean_cut_fraction}


def run_mpx_edge_cut(t: Trial) -> Metrics:
    g = t.g
    k = int(t.params.get("k", GENERATORS["mpx-counterexample"].defaults["k"]))
    r = t.settings.real("r")
    r = r if r > 0 else float(2**k)
    # Cycle edges come first; edge 3^k - 1 enters the star's center.
    edge = 3**k - 1
    probability = edge_cut_probability(
        g, edge, r, t.settings.integer("trials"), t.rng, redraw=bool(t.settings.integer("redraw", 0))
    )
    return {"probability": probability, "r": r}


def run_arborescence_stretch(t: Trial) -> Metrics:
    g = t.g
    tree = find_arborescence(g, 0, t.rng, t.settings.real("c", 4.0))
    stretch = total_stretch(g, tree)
    total_load = float(np.dot(load(g, tree), [tree.arc_length[v] for v in range(g.n)]))
    if abs(total_load - stretch) > 1e-9 * max(stretch, 1.0):
        raise RoutingFailure(f"Total load {total_load} differs from total stretch {stretch}.")
    summary = stretch_summary(g, tree)
    return {"stretch": stretch, "constant": summary["normalized"], "volume": summary["volume"]}


def run_routing_ratio(t: Trial) -> Metrics:
    g = t.g
    routing = find_routing(g, 0, t.rng, t.settings.real("c", 4.0))
    total = sum(routing.weights)
    if abs(total - 1.0) > 1e-9:
        raise RoutingFailure(f"Routing weights sum to {total}.")
    if g.n <= MAX_EXACT_RATIO_VERTICES:
        ratio = worst_case_competitive_ratio(routing)
    else:
        ratio = competitive_ratio(routing, single_source_demands(g.n, 0))
    log_n = _log_n(g)
    scale = log_n**3 / math.log(max(log_n, math.e))
    return {"ratio": ratio, "constant": ratio / scale, "trees": float(len(routing.trees))}


def run_maxflow_gap(t: Trial) -> Metrics:
    g = t.g
    eps = t.settings.real("eps", 1e-6, 0.5)
    s, sink = 0, g.n - 1
    exact, _, _ = exact_max_flow(g, s, sink)
    approx = build_approximator(g)
    result = max_st_flow(g, s, sink, eps, approx)
    metrics = {
        "value_ratio": exact / result.value,
        "cut_ratio": result.cut_capacity / exact,
        "recovery_rounds": float(result.routing.recovery_rounds),
    }
    if t.settings.integer("compare_warm", 0):
        b = unit_demand(g.n, s, sink)
        cold = almost_route_directed(g, approx, b, eps)
        warm = fast_almost_route(g, approx, b, eps)
        metrics["warm_faster"] = float(warm.iterations < cold.iterations)
    return metrics


def run_balance_exact(t: Trial) -> Metrics:
    g = t.g
    bal, certificate = imbalance_exact(g)
    certificate.verify(g)
    enumerated, _ = brute_force_imbalance(g)
    return {"bal": bal, "relative_error": abs(bal - enumerated) / enumerated}


def run_flow_symmetry(t: Trial) -> Metrics:
    g = t.g
    bal, _ = imbalance_exact(g)
    b = t.rng.standard_normal(g.n)
    b -= b.mean()
    forward = exact_min_congestion(g, b).value
    backward = exact_min_congestion(g, -b).value
    return {"ratio": backward / forward, "slack": backward - bal * forward}


def run_residual_balance(t: Trial) -> Metrics:
    eps = float(t.params.get("eps", GENERATORS["residual"].defaults["eps"]))
    bal, _ = imbalance_exact(t.g)
    return {"bal": bal, "excess": bal - (2 / eps - 1)}


def run_check_balance(t: Trial) -> Metrics:
    g = t.g
    alpha = t.settings.real("alpha", 1.0)
    eps = t.settings.real("eps", 1e-6, 0.5)
    bal, _ = imbalance_exact(g)
    check = check_balance(g, alpha, eps)
    balanced = check.decision == BalanceDecision.CERTIFIED_BALANCED
    unsound = bal > alpha * (1 + 1e-7) if balanced else bal <= (1 - eps) * alpha
    return {"bal": bal, "balanced": float(balanced), "unsound": float(unsound)}


def run_lowerbound(t: Trial) -> Metrics:
    if t.generator == "lb-general":
        kind, param = LowerBoundKind.GENERAL, int(t.params.get("k", "3"))
    elif t.generator == "lb-eulerian":
        kind, param = LowerBoundKind.EULERIAN, int(t.params.get("n", "9"))
    else:
        raise RoutingFailure("The lower-bound experiment runs on lb-general or lb-eulerian.")
    routing = random_path_routing(t.g, t.rng, t.settings.integer("paths"))
    certificate = lowerbound_certificate(routing, kind, param)
    bound = proven_bound(kind, param)
    return {"certificate": certificate, "bound": bound, "margin": certificate - bound}


def run_composite(t: Trial) -> Metrics:
    """
    A separable quadratic sum_i a_i (x_i - c_i)^2 / 2 on a random box; its
    minimizer is c clipped to the box.
    """
    dims = t.settings.integer("dims")
    steps = t.settings.integer("steps")
    rng = t.rng
    a = rng.uniform(0.1, 10.0, size=dims)
    center = rng.uniform(-5.0, 5.0, size=dims)
    lower = rng.uniform(-3.0, 0.0, size=dims)
    upper = lower + rng.uniform(0.5, 3.0, size=dims)
    smoothness = float(a.max())
    diameter = float(np.linalg.norm(upper - lower))
    optimum = np.clip(center, lower, upper)

    def smooth(x: Vector) -> float:
        return float(np.dot(a, (x - center) ** 2) / 2)

    def gradient(x: Vector) -> Vector:
        result: Vector = a * (x - center)
        return result

    problem = CompositeProblem(
        smooth,
        gradient,
        box_indicator(lower, upper),
        euclidean_box_prox(lower, upper, smoothness),
        smoothness,
        diameter,
        rng.uniform(lower, upper),
    )
    trajectory = minimize(problem, steps)
    best = smooth(optimum)
    eps0 = trajectory.values[0] - best
    violations = sum(
        1
        for k in range(1, steps + 1)
        if trajectory.values[k] - best
        > convergence_bound(smoothness, diameter, eps0, k) + 1e-12
    )
    return {
        "violations": float(violations),
        "monotone": float(trajectory.is_monotone()),
        "final_gap": trajectory.values[-1] - best,
    }


def run_sparsest_cut(t: Trial) -> Metrics:
    g = t.g
    phi = t.settings.real("phi", 1e-12, 1.0)
    router = exact_router if t.settings.integer("exact_router", 0) else None
    rounds = t.settings.integer("rounds", 0) or None
    result = sparsest_cut(g, phi, t.rng, router=router, rounds=rounds)
    if result.cut is None:
        return {"found": 0.0, "valid": 1.0, "sparsity": math.nan}
    value = sparsity(g, result.cut)
    return {"found": 1.0, "valid": float(value <= phi), "sparsity": value}


class Comparison(enum.Enum):
    AT_MOST = "<="
    AT_LEAST = ">="

    def holds(self, value: float, bound: float) -> bool:
        if self == Comparison.AT_MOST:
            return value <= bound
        return value >= bound


@dataclass(frozen=True)
class Check:
    # an aggregate key, "<reducer>_<column>"
    aggregate: str
    comparison: Comparison
    # a fixed number, or the name of a setting holding it
    bound: str

    def value_of(self, settings: Params) -> float:
        try:
            return float(self.bound)
        except ValueError:
            return settings.real(self.bound, -math.inf)


@dataclass(frozen=True)
class Experiment:
    run: Callable[[Trial], Metrics]
    generator: Optional[str]
    settings: Dict[str, str]
    checks: Tuple[Check, ...] = ()
    # aggregate compared against the stored baseline times the profile's slack
    calibrated: Optional[str] = None


EXPERIMENTS: Dict[str, Experiment] = {
    "decomposition-cut": Experiment(
        run_decomposition_cut,
        "eulerian-cycles",
        {"r": "10"},
        calibrated="mean_constant",
    ),
    "cycle-cut": Experiment(
        run_cycle_cut,
        "cycle",
        {"r": "8", "trials": "200", "redraw": "1", "constant_bound": "inf"},
        (Check("max_constant", Comparison.AT_MOST, "constant_bound"),),
        calibrated="mean_constant",
    ),
    "mpx-edge-cut": Experiment(
        run_mpx_edge_cut,
        "mpx-counterexample",
        {"r": "0", "trials": "1000", "redraw": "1", "min_probability": "0.5"},
        (Check("mean_probability", Comparison.AT_LEAST, "min_probability"),),
    ),
    "arborescence-stretch": Experiment(
        run_arborescence_stretch,
        "eulerian-cycles",
        {"c": "4"},
        calibrated="mean_constant",
    ),
    "routing-ratio": Experiment(
        run_routing_ratio,
        "eulerian-cycles",
        {"c": "4"},
        calibrated="max_constant",
    ),
    "maxflow-gap": Experiment(
        run_maxflow_gap,
        "random",
        {"eps": "0.25", "compare_warm": "0", "min_warm_faster": "0.8"},
        (
            Check("min_value_ratio", Comparison.AT_LEAST, "1"),
            Check("max_value_ratio", Comparison.AT_MOST, "max_ratio"),
            Check("max_cut_ratio", Comparison.AT_MOST, "max_ratio"),
            Check("mean_warm_faster", Comparison.AT_LEAST, "min_warm_faster"),
        ),
    ),
    "balance-exact": Experiment(
        run_balance_exact,
        "random",
        {},
        (Check("max_relative_error", Comparison.AT_MOST, "1e-7"),),
    ),
    "flow-symmetry": Experiment(
        run_flow_symmetry,
        "random",
        {},
        (Check("max_slack", Comparison.AT_MOST, "1e-7"),),
    ),
    "residual-balance": Experiment(
        run_residual_balance,
        "residual",
        {},
        (Check("max_excess", Comparison.AT_MOST, "1e-6"),),
    ),
    "check-balance": Experiment(
        run_check_balance,
        "random",
        {"alpha": "2", "eps": "0.1"},
        (Check("max_unsound", Comparison.AT_MOST, "0"),),
    ),
    "lowerbound": Experiment(
        run_lowerbound,
        "lb-general",
        {"paths": "3"},
        (Check("min_margin", Comparison.AT_LEAST, "0"),),
    ),
    "composite": Experiment(
        run_composite,
        None,
        {"dims": "5", "steps": "200"},
        (
            Check("max_violations", Comparison.AT_MOST, "0"),
            Check("min_monotone", Comparison.AT_LEAST, "1"),
        ),
    ),
    "sparsest-cut": Experiment(
        run_sparsest_cut,
        "planted-cut",
        {"phi": "0.11", "exact_router": "0", "rounds": "0", "min_recovery": "0.95"},
        (
            Check("min_valid", Comparison.AT_LEAST, "1"),
            Check("mean_found", Comparison.AT_LEAST, "min_recovery"),
        ),
    ),
}


def _derived_settings(name: str, settings: Dict[str, str]) -> Dict[str, str]:
    """Settings whose defaults depend on other settings."""
    if name == "maxflow-gap":
        eps = float(settings.get("eps", EXPERIMENTS[name].settings["eps"]))
        return {"max_ratio": repr(1 + eps)}
    return {}


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    generator: Optional[str]
    params: Dict[str, str]
    settings: Dict[str, str]
    seeds: Tuple[int, ...]
    tolerance_profile: ToleranceProfile = ToleranceProfile.DEFAULT
    output: Optional[Path] = None
    summary: Optional[Path] = None
    baseline: Optional[Path] = None

    def experiment(self) -> Experiment:
        experiment = EXPERIMENTS.get(self.name)
        if experiment is None:
            raise RoutingFailure(
                f"Unknown experiment {self.name}; choose one of {', '.join(sorted(EXPERIMENTS))}."
            )
        return experiment

    def full_settings(self) -> Params:
        experiment = self.experiment()
        defaults = {**experiment.settings, **_derived_settings(self.name, self.settings)}
        return Params(self.name, self.settings, defaults)


def _strings(data: Any, what: str) -> Dict[str, str]:
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise RoutingFailure(f"Experiment {what} must be an object.")
    return {str(k).replace("-", "_"): str(v) for k, v in data.items()}


def spec_from_json(data: Dict[str, Any], base: Path = Path(".")) -> ExperimentSpec:
    try:
        name = str(data["experiment"])
        seeds = tuple(int(s) for s in data["seeds"])
    except (KeyError, TypeError, ValueError) as e:
        raise RoutingFailure(f"Malformed experiment spec: {e!r}")
    if not seeds:
        raise RoutingFailure("An experiment needs at least one seed.")
    experiment = EXPERIMENTS.get(name)
    generator = data.get("generator", experiment.generator if experiment else None)
    try:
        profile = ToleranceProfile(data.get("tolerance_profile", "default"))
    except ValueError:
        raise RoutingFailure(f"Unknown tolerance profile {data.get('tolerance_profile')}.")

    def path(key: str) -> Optional[Path]:
        return base / str(data[key]) if key in data else None

    spec = ExperimentSpec(
        name,
        None if generator is None else str(generator),
        _strings(data.get("params"), "params"),
        _strings(data.get("settings"), "settings"),
        seeds,
        profile,
        path("output"),
        path("summary"),
        path("baseline"),
    )
    spec.full_settings()
    return spec


def load_spec(path: Path) -> ExperimentSpec:
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise RoutingFailure(f"Could not parse experiment spec {path}: {e}")
    spec = spec_from_json(data, path.parent)
    if spec.baseline is None:
        spec = ExperimentSpec(
            spec.name,
            spec.generator,
            spec.params,
            spec.settings,
            spec.seeds,
            spec.tolerance_profile,
            spec.output,
            spec.summary,
            path.with_suffix(".baseline.json"),
        )
    return spec


def _run_seed(args: Tuple[ExperimentSpec, int]) -> Metrics:
    spec, seed = args
    experiment = spec.experiment()
    rng = make_rng(seed)
    graph = None
    if spec.generator is not None:
        graph = generate(spec.generator, spec.params, seed)
    trial = Trial(graph, spec.generator, spec.params, spec.full_settings(), rng)
    try:
        return experiment.run(trial)
    except RoutingFailure as e:
        raise e.within(f"{spec.name}, seed {seed}") from e


class Status(enum.Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    CALIBRATED = "CALIBRATED"

    def __str__(self) -> str:
        return self.value


@dataclass
class CheckOutcome:
    description: str
    passed: bool


@dataclass
class ExperimentReport:
    name: str
    columns: List[str]
    rows: List[Tuple[int, Metrics]]
    aggregates: Dict[str, float]
    checks: List[CheckOutcome]
    status: Status
    # wall-clock times live here only, so the rest of the report is reproducible
    timestamps: Dict[str, str] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status != Status.FAIL


def aggregate(columns: Sequence[str], rows: Sequence[Metrics]) -> Dict[str, float]:
    result: Dict[str, float] = {}
    for column in columns:
        values = np.array([row[column] for row in rows if not math.isnan(row[column])])
        if len(values) == 0:
            continue
        result[f"mean_{column}"] = float(values.mean())
        result[f"var_{column}"] = float(values.var())
        result[f"min_{column}"] = float(values.min())
        result[f"max_{column}"] = float(values.max())
    return result


def _read_baseline(path: Optional[Path]) -> Dict[str, float]:
    if path is None or not path.exists():
        return {}
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    return {str(k): float(v) for k, v in data.items()}


def run_experiment(spec: ExperimentSpec, parallel: Optional[int] = None) -> ExperimentReport:
    experiment = spec.experiment()
    settings = spec.full_settings()
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    rows = map_trials(_run_seed, [(spec, seed) for seed in spec.seeds], parallel)
    finished = datetime.datetime.now(datetime.timezone.utc).isoformat()

    columns: List[str] = []
    for row in rows:
        columns += [c for c in row if c not in columns]
    aggregates = aggregate(columns, rows)

    outcomes: List[CheckOutcome] = []
    for check in experiment.checks:
        bound = check.value_of(settings)
        value = aggregates.get(check.aggregate)
        if value is None:
            continue
        outcomes.append(
            CheckOutcome(
                f"{check.aggregate} = {value:.6g} {check.comparison.value} {bound:.6g}",
                check.comparison.holds(value, bound),
            )
        )

    status = Status.PASS
    if experiment.calibrated is not None:
        baseline = _read_baseline(spec.baseline)
        observed = aggregates[experiment.calibrated]
        if experiment.calibrated in baseline:
            limit = baseline[experiment.calibrated] * spec.tolerance_profile.baseline_slack()
            outcomes.append(
                CheckOutcome(
                    f"{experiment.calibrated} = {observed:.6g} <= baseline x slack = {limit:.6g}",
                    observed <= limit,
                )
            )
        else:
            status = Status.CALIBRATED
            if spec.baseline is not None:
                baseline[experiment.calibrated] = observed
                with open(spec.baseline, "w", encoding="utf-8") as f:
                    json.dump(baseline, f, indent=2, sort_keys=True)
                    f.write("\n")
            logger.info("%s: calibrated %s = %g", spec.name, experiment.calibrated, observed)

    if not all(outcome.passed for outcome in outcomes):
        status = Status.FAIL
    return ExperimentReport(
        spec.name,
        columns,
        list(zip(spec.seeds, rows)),
        aggregates,
        outcomes,
        status,
        {"started": started, "finished": finished},
    )


def _number(x: float) -> str:
    if math.isnan(x):
        return "nan"
    return f"{x:.10g}"


def format_report(report: ExperimentReport) -> str:
    """gnuplot-friendly columns with '#' comment lines around them."""
    lines = [f"# experiment {report.name}", "# seed " + " ".join(report.columns)]
    for seed, row in report.rows:
        lines.append(
            " ".join([str(seed)] + [_number(row.get(c, math.nan)) for c in report.columns])
        )
    for key in sorted(report.aggregates):
        lines.append(f"# {key} {_number(report.aggregates[key])}")
    for outcome in report.checks:
        lines.append(f"# [{'PASS' if outcome.passed else 'FAIL'}] {outcome.description}")
    lines.append(f"# status {report.status}")
    return "\n".join(lines) + "\n"


def report_to_json(report: ExperimentReport) -> Dict[str, Any]:
    return {
        "experiment": report.name,
        "status": str(report.status),
        "rows": [
            {"seed": seed, **{c: row.get(c, math.nan) for c in report.columns}}
            for seed, row in report.rows
        ],
        "aggregates": report.aggregates,
        "checks": [{"check": o.description, "passed": o.passed} for o in report.checks],
        "timestamps": report.timestamps,
    }


def write_outputs(spec: ExperimentSpec, report: ExperimentReport) -> None:
    if spec.output is not None:
        with open(spec.output, "w", encoding="utf-8") as f:
            f.write(format_report(report))
    if spec.summary is not None:
        with open(spec.summary, "w", encoding="utf-8") as f:
            json.dump(report_to_json(report), f, indent=2, sort_keys=True)
            f.write("\n")
