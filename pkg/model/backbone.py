"""
backbone.py - Backbone graph of computing nodes.

The default backbone is a full binary tree numbered like a heap: root 1,
children of i are 2i and 2i+1. Edges point child -> parent, so data enters
at the leaves and the root produces the output.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable

from settings import MAX_BACKBONE_DEPTH


class InvalidDepth(ValueError):
    """Backbone depth outside 1..MAX_BACKBONE_DEPTH."""


class InvalidGraph(ValueError):
    """Edge list references unknown nodes or contains a cycle."""


@dataclass(frozen=True)
class BackboneGraph:
    nodes: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]      # (source, consumer)
    depth: int | None = None                # set for tree backbones

    def __post_init__(self):
        known = set(self.nodes)
        if len(known) != len(self.nodes):
            raise InvalidGraph(f"duplicate node ids in {self.nodes}")
        for a, b in self.edges:
            if a not in known or b not in known or a == b:
                raise InvalidGraph(f"bad edge {a}->{b}")
        topological_order(self.nodes, self.edges)

    @classmethod
    def from_edges(cls, nodes: Iterable[int], edges: Iterable[tuple[int, int]]) -> "BackboneGraph":
        return cls(tuple(sorted(int(n) for n in nodes)),
                   tuple(sorted((int(a), int(b)) for a, b in edges)))

    def parents(self, node: int) -> list[int]:
        """Nodes feeding `node`, ascending."""
        return sorted(a for a, b in self.edges if b == node)

    def consumers(self, node: int) -> list[int]:
        return sorted(b for a, b in self.edges if a == node)

    @property
    def entry_nodes(self) -> list[int]:
        """Nodes with no incoming edge; they read the raw features."""
        fed = {b for _, b in self.edges}
        return [n for n in self.nodes if n not in fed]

    @property
    def output_nodes(self) -> list[int]:
        sources = {a for a, _ in self.edges}
        return [n for n in self.nodes if n not in sources]

    def to_dict(self) -> dict:
        if self.depth is not None:
            return {"backbone_depth": self.depth}
        return {"nodes": list(self.nodes), "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_dict(cls, data: dict) -> "BackboneGraph":
        if "backbone_depth" in data:
            return build_backbone(int(data["backbone_depth"]))
        try:
            return cls.from_edges(data["nodes"], [tuple(e) for e in data["edges"]])
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidGraph(f"bad backbone object: {e}") from e


def build_backbone(depth: int) -> BackboneGraph:
    """Full binary tree with 2^depth - 1 nodes, edges leaf -> root."""
    if isinstance(depth, bool) or not isinstance(depth, int) \
            or not 1 <= depth <= MAX_BACKBONE_DEPTH:
        raise InvalidDepth(f"depth must be in 1..{MAX_BACKBONE_DEPTH}, got {depth!r}")
    n = 2 ** depth - 1
    nodes = tuple(range(1, n + 1))
    edges = tuple((child, child // 2) for child in range(2, n + 1))
    return BackboneGraph(nodes, tuple(sorted(edges)), depth)


def topological_order(nodes: Iterable[int], edges: Iterable[tuple[int, int]]) -> list[int]:
    """Kahn's algorithm, smallest ready id first so the order is deterministic."""
    nodes = list(nodes)
    indeg = {n: 0 for n in nodes}
    out: dict[int, list[int]] = {n: [] for n in nodes}
    for a, b in edges:
        out[a].append(b)
        indeg[b] += 1
    ready = [n for n in nodes if indeg[n] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        n = heapq.heappop(ready)
        order.append(n)
        for m in out[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                heapq.heappush(ready, m)
    if len(order) != len(nodes):
        raise InvalidGraph("graph has a cycle")
    return order
