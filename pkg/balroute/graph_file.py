import json
import re
import typing
from typing import Any, Callable, Dict, List, TypeVar

import numpy as np

from .error import RoutingFailure
from .graph import DemandVector, DirectedGraph, Edge, Flow
from .options import Formatter


def parse_graph(f: typing.TextIO, check_strongly_connected: bool = True) -> DirectedGraph:
    """
    Read a graph either as an edge list ("n m" header, then "tail head weight
    [length]" per edge) or, if the text starts with "{", as the JSON form
    written by `graph_to_json`. '#' starts a comment.
    """
    text = f.read()
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise RoutingFailure(f"Could not parse graph JSON: {e}")
        return graph_from_json(data, check_strongly_connected)

    re_comment = re.compile(r"#.*")
    lines = [
        (lineno, re_comment.sub("", line).split())
        for lineno, line in enumerate(text.splitlines(), 1)
    ]
    lines = [(lineno, words) for lineno, words in lines if words]
    if not lines:
        raise RoutingFailure("Graph file is empty.")

    T = TypeVar("T")

    def try_parse(lineno: int, parser: Callable[[], T]) -> T:
        try:
            return parser()
        except ValueError:
            raise RoutingFailure(f"Could not parse line {lineno}: {' '.join(words)}")

    lineno, words = lines[0]
    if len(words) != 2:
        raise RoutingFailure(f"Line {lineno}: expected header 'n m'.")
    n, m = try_parse(lineno, lambda: (int(words[0]), int(words[1])))
    if len(lines) - 1 != m:
        raise RoutingFailure(f"Header announces {m} edges, file has {len(lines) - 1}.")

    edges: List[Edge] = []
    for lineno, words in lines[1:]:
        if len(words) not in (3, 4):
            raise RoutingFailure(f"Line {lineno}: expected 'tail head weight [length]'.")
        edges.append(
            try_parse(
                lineno,
                lambda: Edge(
                    int(words[0]),
                    int(words[1]),
                    float(words[2]),
                    float(words[3]) if len(words) == 4 else 1.0,
                ),
            )
        )
    return DirectedGraph(n, tuple(edges), check_strongly_connected=check_strongly_connected)


def format_graph(g: DirectedGraph, fmt: Formatter) -> str:
    lines = [f"{g.n} {g.m}"]
    for e in g.edges:
        lines.append(f"{e.tail} {e.head} {fmt.number(e.weight)} {fmt.number(e.length)}")
    return "\n".join(lines) + "\n"


def graph_to_json(g: DirectedGraph) -> Dict[str, Any]:
    return {
        "n": g.n,
        "edges": [[e.tail, e.head, e.weight, e.length] for e in g.edges],
    }


def graph_from_json(data: Dict[str, Any], check_strongly_connected: bool = True) -> DirectedGraph:
    try:
        n = int(data["n"])
        edges = tuple(
            Edge(int(t), int(h), float(w), float(rest[0]) if rest else 1.0)
            for t, h, w, *rest in data["edges"]
        )
    except (KeyError, TypeError, ValueError) as e:
        raise RoutingFailure(f"Malformed graph JSON: {e!r}")
    return DirectedGraph(n, edges, check_strongly_connected=check_strongly_connected)


def parse_demand(f: typing.TextIO, n: int) -> DemandVector:
    """A demand file lists one value per vertex, whitespace separated."""
    words = re.sub(r"#.*", "", f.read()).split()
    try:
        values = [float(w) for w in words]
    except ValueError as e:
        raise RoutingFailure(f"Could not parse demand file: {e}")
    if len(values) != n:
        raise RoutingFailure(f"Demand file has {len(values)} entries, graph has {n} vertices.")
    return np.array(values)


def format_flow(g: DirectedGraph, f: Flow, fmt: Formatter) -> List[str]:
    return [
        f"{e.tail} {e.head} {fmt.number(float(x))}" for e, x in zip(g.edges, f)
    ]
