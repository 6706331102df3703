import argparse
from dataclasses import replace
import json
import logging
import sys
import traceback
from pathlib import Path
from typing import Any, Dict, List, Optional

from .arborescence import find_arborescence, stretch_summary
from .balance import imbalance_exact
from .balance_check import check_balance
from .decomposition import cluster_directed
from .error import RoutingFailure
from .experiments import format_report, load_spec, report_to_json, run_experiment, write_outputs
from .generators import GENERATORS, generate
from .graph import DirectedGraph, Flow
from .graph_file import format_flow, format_graph, graph_to_json, parse_demand, parse_graph
from .maxflow import build_approximator, max_st_flow
from .options import (
    ApproximatorKind,
    Formatter,
    Options,
    OutputFormat,
    ToleranceProfile,
    parse_params,
)
from .routing import (
    competitive_ratio,
    find_routing,
    routing_from_json,
    routing_to_json,
    single_source_demands,
    worst_case_competitive_ratio,
)
from .sparsest_cut import sparsest_cut
from .trials import make_rng
from .visualize import render_svg


def set_up_logging(debug: bool) -> None:
    logging.basicConfig(
        format="[%(levelname)s] %(message)s",
        level=logging.DEBUG if debug else logging.INFO,
    )


def print_current_exception(sanitize: bool) -> None:
    """Print a traceback for the current exception to stdout.

    If `sanitize` is true, the filename's full path is stripped,
    and the line is set to 0, so golden outputs do not depend on
    where the package lives."""
    if sanitize:
        tb = traceback.TracebackException(*sys.exc_info())
        for frame in tb.stack:
            frame.lineno = 0
            frame.filename = Path(frame.filename).name
        for line in tb.format(chain=False):
            print(line, end="")
    else:
        traceback.print_exc(file=sys.stdout)


def print_exception(exc: Exception, context: str, sanitize: bool) -> None:
    if isinstance(exc, OSError):
        print(f"OSError in {context}: {exc}")
    elif isinstance(exc, RoutingFailure):
        print(f"Routing failure in {context}:\n")
        print(exc)
    else:
        print(f"Internal error in {context}:\n")
        print_current_exception(sanitize=sanitize)


def load_graph(options: Options, check_strongly_connected: bool = True) -> DirectedGraph:
    if options.graph_path is None:
        raise RoutingFailure(f"{options.command} needs a graph file.")
    if str(options.graph_path) == "-":
        return parse_graph(sys.stdin, check_strongly_connected)
    with open(options.graph_path, encoding="utf-8") as f:
        return parse_graph(f, check_strongly_connected)


def emit(options: Options, lines: List[str], data: Dict[str, Any]) -> None:
    if options.output_format == OutputFormat.JSON:
        print(json.dumps(data, indent=2, sort_keys=True))
    else:
        for line in lines:
            print(line)


def flow_json(flow: Flow) -> List[float]:
    return [float(x) for x in flow]


def cmd_gen(options: Options, fmt: Formatter) -> int:
    assert options.generator is not None
    g = generate(options.generator, options.params, options.seed)
    if options.output_format == OutputFormat.JSON:
        print(json.dumps(graph_to_json(g), indent=2))
    else:
        print(format_graph(g, fmt), end="")
    return 0


def cmd_balance(options: Options, fmt: Formatter) -> int:
    g = load_graph(options)
    bal, certificate = imbalance_exact(g)
    assert certificate.circulation is not None
    emit(
        options,
        [f"bal {fmt.number(bal)}", "certificate circulation"]
        + format_flow(g, certificate.circulation, fmt),
        {"bal": bal, "certificate": "circulation", "flow": flow_json(certificate.circulation)},
    )
    return 0


def cmd_check_balance(options: Options, fmt: Formatter) -> int:
    g = load_graph(options)
    check = check_balance(
        g, options.alpha, options.eps, options.approximator, make_rng(options.seed)
    )
    certificate = check.certificate
    lines = [f"decision {check.decision}", f"phase {check.phase}"]
    data: Dict[str, Any] = {"decision": str(check.decision), "phase": check.phase}
    if certificate.circulation is not None:
        lines += ["certificate circulation"] + format_flow(g, certificate.circulation, fmt)
        data["flow"] = flow_json(certificate.circulation)
    if certificate.violating_cut is not None:
        members = sorted(certificate.violating_cut.members)
        lines += [f"certificate cut {fmt.vertex_set(members)}"]
        data["cut"] = members
    emit(options, lines, data)
    return 0


def cmd_decompose(options: Options, fmt: Formatter) -> int:
    g = load_graph(options)
    if options.radius is None:
        raise RoutingFailure("decompose needs --radius.")
    partition = cluster_directed(g, options.radius, make_rng(options.seed))
    partition.verify(g)
    if options.visualize is not None:
        options.visualize.write_text(render_svg(g, partition))
    lines = [
        f"clusters {partition.cluster_count}",
        f"cut_weight {fmt.number(partition.cut_weight)}",
        f"attempts {partition.attempts}",
    ]
    for i, root in enumerate(partition.roots):
        lines.append(f"cluster {i} root {root} radius {fmt.number(partition.radii[i])}")
    lines += [
        f"{v} {cluster} {partition.roots[cluster]}"
        for v, cluster in enumerate(int(c) for c in partition.assignment)
    ]
    emit(
        options,
        lines,
        {
            "assignment": [int(c) for c in partition.assignment],
            "roots": list(partition.roots),
            "radii": list(partition.radii),
            "cut_weight": partition.cut_weight,
            "attempts": partition.attempts,
        },
    )
    return 0


def cmd_arborescence(options: Options, fmt: Formatter) -> int:
    g = load_graph(options)
    tree = find_arborescence(
        g, options.root, make_rng(options.seed), options.arborescence_constant
    )
    if options.visualize is not None:
        options.visualize.write_text(render_svg(g, tree))
    summary = stretch_summary(g, tree)
    lines = [f"root {tree.root}"] + [f"{key} {fmt.number(v)}" for key, v in summary.items()]
    for v in range(g.n):
        if v != tree.root:
            witness = " ".join(str(e) for e in tree.witness[v])
            lines.append(
                f"{tree.parent[v]} -> {v} length {fmt.number(tree.arc_length[v])} via {witness}"
            )
    emit(
        options,
        lines,
        {
            "root": tree.root,
            "parent": list(tree.parent),
            "arc_length": list(tree.arc_length),
            "witness": [list(path) for path in tree.witness],
            **summary,
        },
    )
    return 0


def cmd_routing(options: Options, fmt: Formatter) -> int:
    g = load_graph(options)
    routing = find_routing(
        g,
        options.root,
        make_rng(options.seed),
        options.arborescence_constant,
        parallel=options.parallel,
    )
    lines = [f"source {routing.source}", f"trees {len(routing.trees)}"]
    for i, (tree, weight) in enumerate(zip(routing.trees, routing.weights)):
        lines.append(f"tree {i} weight {fmt.number(weight)} parents {' '.join(map(str, tree.parent))}")
    emit(options, lines, routing_to_json(routing))
    return 0


def cmd_eval_routing(options: Options, fmt: Formatter) -> int:
    g = load_graph(options)
    if options.routing_path is None:
        raise RoutingFailure("eval-routing needs --routing.")
    with open(options.routing_path, encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise RoutingFailure(f"Could not parse routing file: {e}")
    routing = routing_from_json(g, data)
    demands = []
    for path in options.demand_paths:
        with open(path, encoding="utf-8") as f:
            demands.append(parse_demand(f, g.n))
    if not demands:
        demands = single_source_demands(g.n, routing.source)
    ratio = competitive_ratio(routing, demands)
    lines = [f"demands {len(demands)}", f"competitive_ratio {fmt.number(ratio)}"]
    result: Dict[str, Any] = {"demands": len(demands), "competitive_ratio": ratio}
    if options.exact_ratio:
        worst = worst_case_competitive_ratio(routing)
        lines.append(f"worst_case_ratio {fmt.number(worst)}")
        result["worst_case_ratio"] = worst
    emit(options, lines, result)
    return 0


def cmd_maxflow(options: Options, fmt: Formatter) -> int:
    g = load_graph(options)
    if options.sink is None:
        raise RoutingFailure("maxflow needs --sink.")
    approx = build_approximator(g, options.approximator, make_rng(options.seed))
    result = max_st_flow(g, options.root, options.sink, options.eps, approx)
    routing = result.routing
    gap = routing.primal_bound / routing.dual_bound if routing.dual_bound > 0 else float("inf")
    members = sorted(result.cut.members)
    emit(
        options,
        [
            f"value {fmt.number(result.value)}",
            f"cut_capacity {fmt.number(result.cut_capacity)}",
            f"cut {fmt.vertex_set(members)}",
            f"primal {fmt.number(routing.primal_bound)}",
            f"dual {fmt.number(routing.dual_bound)}",
            f"gap {fmt.number(gap)}",
            f"approximator {approx.name} quality {fmt.number(approx.quality)}",
        ]
        + format_flow(g, result.flow, fmt),
        {
            "value": result.value,
            "cut_capacity": result.cut_capacity,
            "cut": members,
            "primal": routing.primal_bound,
            "dual": routing.dual_bound,
            "flow": flow_json(result.flow),
        },
    )
    return 0


def cmd_sparsest_cut(options: Options, fmt: Formatter) -> int:
    g = load_graph(options)
    result = sparsest_cut(g, options.phi, make_rng(options.seed), eps=options.eps)
    if result.cut is None:
        lines = [f"no cut of sparsity {fmt.number(options.phi)} found in {result.rounds} rounds"]
        lines.append(f"routed_bisections {len(result.routed_bisections)}")
        data: Dict[str, Any] = {"cut": None, "routed_bisections": len(result.routed_bisections)}
    else:
        assert result.sparsity is not None
        members = sorted(result.cut.members)
        lines = [
            f"cut {fmt.vertex_set(members)}",
            f"sparsity {fmt.number(result.sparsity)}",
            f"found_by {result.source}",
            f"rounds {result.rounds}",
        ]
        data = {"cut": members, "sparsity": result.sparsity, "found_by": result.source}
    emit(options, lines, data)
    return 0


def cmd_experiment(options: Options, fmt: Formatter) -> int:
    if options.spec_path is None:
        raise RoutingFailure("experiment needs a spec file.")
    spec = load_spec(options.spec_path)
    if options.tolerance_profile != ToleranceProfile.DEFAULT:
        spec = replace(spec, tolerance_profile=options.tolerance_profile)
    report = run_experiment(spec, options.parallel)
    write_outputs(spec, report)
    if options.output_format == OutputFormat.JSON:
        summary = report_to_json(report)
        del summary["timestamps"]
        print(json.dumps(summary, indent=2, sort_keys=True))
    else:
        print(format_report(report), end="")
    return 0 if report.passed else 1


COMMANDS = {
    Options.CommandEnum.GEN: cmd_gen,
    Options.CommandEnum.BALANCE: cmd_balance,
    Options.CommandEnum.CHECK_BALANCE: cmd_check_balance,
    Options.CommandEnum.DECOMPOSE: cmd_decompose,
    Options.CommandEnum.ARBORESCENCE: cmd_arborescence,
    Options.CommandEnum.ROUTING: cmd_routing,
    Options.CommandEnum.EVAL_ROUTING: cmd_eval_routing,
    Options.CommandEnum.MAXFLOW: cmd_maxflow,
    Options.CommandEnum.SPARSEST_CUT: cmd_sparsest_cut,
    Options.CommandEnum.EXPERIMENT: cmd_experiment,
}


def run(options: Options) -> int:
    fmt = options.formatter()
    try:
        return COMMANDS[options.command](options, fmt)
    except Exception as e:
        print_exception(e, str(options.command), options.sanitize_tracebacks)
        return 1


def parse_flags(flags: List[str]) -> Options:
    parser = argparse.ArgumentParser(
        description="Flow, routing and cut algorithms for directed graphs of bounded imbalance.",
        usage="%(prog)s COMMAND [ARGS ...] [--seed N] [--format text|json]",
        epilog="Generators: " + ", ".join(sorted(GENERATORS)),
    )

    group = parser.add_argument_group("Input Options")
    group.add_argument(
        "command",
        type=Options.CommandEnum,
        choices=list(Options.CommandEnum),
        help="What to run",
    )
    group.add_argument(
        metavar="ARGS",
        nargs="*",
        dest="args",
        help="For gen: a generator and its key=value parameters. For experiment: "
        "a spec file. Otherwise: a graph file, '-' for stdin",
    )
    group.add_argument(
        "--routing",
        metavar="FILE",
        dest="routing_path",
        type=Path,
        help="Routing file written by `routing --format json`",
    )
    group.add_argument(
        "--demand",
        metavar="FILE",
        dest="demand_paths",
        action="append",
        type=Path,
        default=[],
        help="Demand file with one value per vertex. May be given several times",
    )

    group = parser.add_argument_group("Output Options")
    group.add_argument(
        "--format",
        dest="output_format",
        type=OutputFormat,
        choices=list(OutputFormat),
        default="text",
        help="Output format. Default: text",
    )
    group.add_argument(
        "--visualize",
        metavar="SVG_FILE",
        dest="visualize",
        type=Path,
        help="Write an SVG drawing of the partition or arborescence using graphviz",
    )
    group.add_argument(
        "--debug",
        dest="debug",
        action="store_true",
        help="Log solver progress",
    )
    group.add_argument(
        "--sanitize-tracebacks",
        dest="sanitize_tracebacks",
        action="store_true",
        help=argparse.SUPPRESS,
    )

    group = parser.add_argument_group("Algorithm Options")
    group.add_argument("--seed", dest="seed", type=int, default=0, help="Random seed. Default: 0")
    group.add_argument(
        "--tolerance-profile",
        dest="tolerance_profile",
        type=ToleranceProfile,
        choices=list(ToleranceProfile),
        default="default",
        help="Slack applied to stored experiment baselines. Default: default",
    )
    group.add_argument("--radius", dest="radius", type=float, help="Cluster radius for decompose")
    group.add_argument(
        "--root",
        "--source",
        dest="root",
        type=int,
        default=0,
        help="Root of the arborescence or routing, source of maxflow. Default: 0",
    )
    group.add_argument("--sink", dest="sink", type=int, help="Sink for maxflow")
    group.add_argument(
        "--alpha", dest="alpha", type=float, default=2.0, help="Imbalance threshold. Default: 2"
    )
    group.add_argument(
        "--eps", dest="eps", type=float, default=0.1, help="Accuracy. Default: 0.1"
    )
    group.add_argument(
        "--phi", dest="phi", type=float, default=0.5, help="Sparsity target. Default: 0.5"
    )
    group.add_argument(
        "--constant",
        dest="arborescence_constant",
        type=float,
        default=8.0,
        help="Radius divisor constant of the arborescence construction (at least 4). Default: 8",
    )
    group.add_argument(
        "--approximator",
        dest="approximator",
        type=ApproximatorKind,
        choices=list(ApproximatorKind),
        default="auto",
        help="Congestion approximator: all cuts, or arborescences of an oblivious routing. "
        "Default: auto (all cuts up to 16 vertices)",
    )
    group.add_argument(
        "--exact-ratio",
        dest="exact_ratio",
        action="store_true",
        help="Also compute the worst-case competitive ratio by linear programming",
    )
    group.add_argument(
        "-j",
        "--parallel",
        metavar="N",
        dest="parallel",
        type=int,
        help="Run independent trials on N processes",
    )

    # Graph files may follow the options, as in `maxflow --sink 3 g.txt`
    args = parser.parse_intermixed_args(flags)
    command: Options.CommandEnum = args.command
    positional: List[str] = args.args

    generator: Optional[str] = None
    params: Dict[str, str] = {}
    graph_path: Optional[Path] = None
    spec_path: Optional[Path] = None
    if command == Options.CommandEnum.GEN:
        if not positional:
            parser.error("gen needs a generator name")
        generator = positional[0]
        try:
            params = parse_params(positional[1:])
        except ValueError as e:
            parser.error(str(e))
    elif command == Options.CommandEnum.EXPERIMENT:
        if len(positional) != 1:
            parser.error("experiment needs exactly one spec file")
        spec_path = Path(positional[0])
    else:
        if len(positional) > 1:
            parser.error(f"{command} takes one graph file")
        graph_path = Path(positional[0]) if positional else None

    return Options(
        command=command,
        graph_path=graph_path,
        seed=args.seed,
        output_format=args.output_format,
        tolerance_profile=args.tolerance_profile,
        debug=args.debug,
        sanitize_tracebacks=args.sanitize_tracebacks,
        generator=generator,
        params=params,
        radius=args.radius,
        root=args.root,
        sink=args.sink,
        alpha=args.alpha,
        eps=args.eps,
        phi=args.phi,
        arborescence_constant=args.arborescence_constant,
        approximator=args.approximator,
        routing_path=args.routing_path,
        demand_paths=args.demand_paths,
        exact_ratio=args.exact_ratio,
        spec_path=spec_path,
        parallel=args.parallel,
        visualize=args.visualize,
    )


def main() -> None:
    options = parse_flags(sys.argv[1:])
    set_up_logging(options.debug)
    sys.exit(run(options))


if __name__ == "__main__":
    main()
