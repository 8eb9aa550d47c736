from __future__ import annotations

from pathlib import Path
from typing import List, Union

import networkx as nx

from gridloom.dfg.graph import Dfg

_SECTION_COLOR = {"index": "lightblue", "address": "khaki", "memory": "salmon", "compute": "palegreen"}


def _label(g: Dfg, nid: int) -> str:
    n = g.nodes[nid]
    if n.is_const:
        return f"#{n.value}"
    text = n.op if n.variant is None else f"{n.op}.{n.variant}"
    if n.array:
        text += f" {n.array}@{n.bank}"
    return text


def to_dot(g: Dfg, *, include_consts: bool = False) -> str:
    """DOT text; node and edge order follow node ids, so output is stable."""
    lines: List[str] = [f'digraph "{g.name}" {{', "  node [shape=box, style=filled];"]
    for n in g.nodes:
        if n.is_const and not include_consts:
            continue
        color = _SECTION_COLOR.get(n.section, "white")
        lines.append(f'  n{n.id} [label="{n.id}: {_label(g, n.id)}", fillcolor={color}, latency={n.latency}];')
    for e in sorted(g.edges, key=lambda e: (e.dst, e.pos, e.src, e.kind)):
        if g.nodes[e.src].is_const and not include_consts:
            continue
        attrs = [f'label="{e.pos}"' if e.kind == "data" else 'label="order"']
        if e.distance:
            attrs.append(f'distance={e.distance}')
            attrs.append("style=dashed")
        if e.kind == "order":
            attrs.append("color=gray")
        lines.append(f"  n{e.src} -> n{e.dst} [{', '.join(attrs)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_text(g: Dfg) -> str:
    """Line-oriented listing: one NODE line per operation, one EDGE line per dependency."""
    lines = [f"DFG {g.name} nodes={g.node_count} trip={g.trip_count} trip_expr={g.trip_expr}"]
    for n in g.nodes:
        if n.is_const:
            continue
        lines.append(f"NODE {n.id} {_label(g, n.id).replace(' ', ':')} lat={n.latency} section={n.section}")
    for e in sorted(g.edges, key=lambda e: (e.dst, e.pos, e.src, e.kind)):
        src = f"#{g.nodes[e.src].value}" if g.nodes[e.src].is_const else str(e.src)
        lines.append(f"EDGE {src} -> {e.dst} pos={e.pos} dist={e.distance} kind={e.kind} init={e.init} gap={e.gap}")
    return "\n".join(lines) + "\n"


def write_graphml(g: Dfg, path: Union[str, Path]) -> None:
    nx.write_graphml(g.to_networkx(), str(path))
