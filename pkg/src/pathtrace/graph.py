"""Immutable causal DAG over named variables, plus DOT import/export."""

from __future__ import annotations

import graphlib
import heapq
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import CycleDetected, DuplicateEdge, InvalidGraph, SelfLoop, UnknownNode

Edge = tuple[str, str]


@dataclass(frozen=True)
class Dag:
    """Validated directed acyclic graph. Build through :func:`build_dag`."""

    nodes: frozenset[str]
    edges: frozenset[Edge]
    _parents: dict = field(default=None, repr=False, compare=False, hash=False)
    _children: dict = field(default=None, repr=False, compare=False, hash=False)
    _order: tuple = field(default=None, repr=False, compare=False, hash=False)

    def __contains__(self, node: str) -> bool:
        return node in self.nodes

    def __len__(self) -> int:
        return len(self.nodes)

    def parents(self, node: str) -> list[str]:
        return parents(self, node)

    def children(self, node: str) -> list[str]:
        _check(self, node)
        return list(self._children[node])

    def ancestors(self, node: str) -> set[str]:
        return ancestors(self, node)

    def is_root(self, node: str) -> bool:
        return not self.parents(node)

    def topological_order(self) -> list[str]:
        return list(self._order)

    def to_json(self) -> dict:
        return {"edges": [list(e) for e in sorted(self.edges)],
                "nodes": sorted(self.nodes)}


def _check(dag: Dag, node: str) -> None:
    if node not in dag.nodes:
        raise UnknownNode(f"unknown node {node!r}")


def build_dag(edges: Iterable[Edge], nodes: Iterable[str] = ()) -> Dag:
    """Validate ``edges`` (and optional isolated ``nodes``) into a :class:`Dag`.

    Raises SelfLoop, DuplicateEdge or CycleDetected; the cycle error names
    one offending node sequence.
    """
    edge_list = [tuple(e) for e in edges]
    extra = list(nodes)
    if not edge_list and not extra:
        raise InvalidGraph("edge list is empty")
    seen: set[Edge] = set()
    for e in edge_list:
        if len(e) != 2:
            raise InvalidGraph(f"edge {e!r} is not a pair")
        u, v = e
        for name in (u, v):
            if not isinstance(name, str) or not name:
                raise InvalidGraph(f"invalid node name {name!r}")
        if u == v:
            raise SelfLoop(f"self-loop on {u!r}")
        if e in seen:
            raise DuplicateEdge(f"duplicate edge {u!r} -> {v!r}")
        seen.add(e)
    for name in extra:
        if not isinstance(name, str) or not name:
            raise InvalidGraph(f"invalid node name {name!r}")

    node_set = frozenset(extra) | frozenset(n for e in edge_list for n in e)
    par: dict[str, list[str]] = {n: [] for n in node_set}
    chi: dict[str, list[str]] = {n: [] for n in node_set}
    for u, v in edge_list:
        par[v].append(u)
        chi[u].append(v)

    try:
        graphlib.TopologicalSorter({n: par[n] for n in node_set}).prepare()
    except graphlib.CycleError as exc:
        cyc = list(exc.args[1])
        if (cyc[0], cyc[1]) not in seen:
            cyc.reverse()
        raise CycleDetected(cyc) from None

    parents_t = {n: tuple(sorted(p)) for n, p in par.items()}
    children_t = {n: tuple(sorted(c)) for n, c in chi.items()}
    return Dag(node_set, frozenset(seen), parents_t, children_t,
               tuple(_kahn(node_set, parents_t, children_t)))


def _kahn(nodes, par, chi) -> list[str]:
    indeg = {n: len(par[n]) for n in nodes}
    heap = [n for n in nodes if indeg[n] == 0]
    heapq.heapify(heap)
    out = []
    while heap:
        n = heapq.heappop(heap)
        out.append(n)
        for c in chi[n]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(heap, c)
    return out


def parents(dag: Dag, node: str) -> list[str]:
    """Parents of ``node`` in lexicographic order."""
    _check(dag, node)
    return list(dag._parents[node])


def ancestors(dag: Dag, node: str) -> set[str]:
    _check(dag, node)
    out: set[str] = set()
    stack = list(dag._parents[node])
    while stack:
        n = stack.pop()
        if n not in out:
            out.add(n)
            stack.extend(dag._parents[n])
    return out


def topological_order(dag: Dag) -> list[str]:
    """Parents before children; ties broken lexicographically."""
    return list(dag._order)


def to_dot(dag: Dag) -> str:
    lines = ["digraph {"]
    lines += [f'  "{n}";' for n in sorted(dag.nodes)]
    lines += [f'  "{u}" -> "{v}";' for u, v in sorted(dag.edges)]
    lines.append("}")
    return "\n".join(lines) + "\n"


_DOT_EDGE = re.compile(r'^\s*"?([^";\s]+)"?\s*->\s*"?([^";\s]+)"?\s*;?\s*$')
_DOT_NODE = re.compile(r'^\s*"?([^";\s{}]+)"?\s*;\s*$')


def from_dot(text: str) -> Dag:
    """Parse the DOT subset written by :func:`to_dot`."""
    edges, nodes = [], []
    for line in text.splitlines():
        s = line.strip()
        if not s or s.startswith("digraph") or s == "}":
            continue
        if m := _DOT_EDGE.match(s):
            edges.append((m.group(1), m.group(2)))
        elif m := _DOT_NODE.match(s):
            nodes.append(m.group(1))
        else:
            raise InvalidGraph(f"cannot parse DOT line {line!r}")
    return build_dag(edges, nodes)


def load_edges(path: str | Path) -> Dag:
    """Read the ``{"edges": [[parent, child], ...]}`` config format."""
    doc = json.loads(Path(path).read_text())
    return build_dag([tuple(e) for e in doc["edges"]], doc.get("nodes", ()))
