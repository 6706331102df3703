from typing import Dict, Optional, Union

from .arborescence import Arborescence
from .decomposition import Partition
from .graph import DirectedGraph
from .options import Formatter

# Cluster fill colors, cycled
PALETTE = [
    "#a6cee3",
    "#b2df8a",
    "#fb9a99",
    "#fdbf6f",
    "#cab2d6",
    "#ffff99",
    "#1f78b4",
    "#33a02c",
]


def render_svg(
    g: DirectedGraph, overlay: Optional[Union[Partition, Arborescence]] = None
) -> str:
    """
    Draw g with graphviz. A partition colors every vertex by cluster and
    boxes the cluster roots; an arborescence draws its arcs in red on top of
    the graph's edges.
    """
    import graphviz as gv

    fmt = Formatter(precision=3)
    dot = gv.Digraph(
        node_attr={
            "shape": "circle",
            "fontname": "Monospace",
            "style": "filled",
            "fillcolor": "white",
        },
        edge_attr={
            "fontname": "Monospace",
            "color": "gray40",
        },
    )

    for v in range(g.n):
        attrs: Dict[str, str] = {}
        if isinstance(overlay, Partition):
            cluster = int(overlay.assignment[v])
            attrs["fillcolor"] = PALETTE[cluster % len(PALETTE)]
            if overlay.roots[cluster] == v:
                attrs["shape"] = "box"
        elif isinstance(overlay, Arborescence) and v == overlay.root:
            attrs["shape"] = "doublecircle"
        dot.node(str(v), **attrs)

    for e in g.edges:
        label = fmt.number(e.weight)
        if e.length != 1.0:
            label += f" / {fmt.number(e.length)}"
        dot.edge(str(e.tail), str(e.head), label=label)

    if isinstance(overlay, Arborescence):
        for v, p in enumerate(overlay.parent):
            if p >= 0:
                dot.edge(
                    str(p),
                    str(v),
                    label=fmt.number(overlay.arc_length[v]),
                    color="red",
                    penwidth="2",
                    constraint="false",
                )

    svg: bytes = dot.pipe("svg")
    return svg.decode("utf-8", "replace")
