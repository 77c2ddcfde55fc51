"""
submodels.py - Security submodels: the fragments one provider can observe.

Three stages, linear in nodes + edges:
    1. group the active nodes by provider
    2. breadth-first search over same-provider edges, direction ignored
    3. heads = no in-edge inside the component, tails = no out-edge inside
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping

from model.backbone import topological_order


@dataclass(frozen=True)
class SecuritySubmodel:
    provider: str
    nodes: tuple[int, ...]      # ascending
    heads: tuple[int, ...]
    tails: tuple[int, ...]
    edges: tuple[tuple[int, int], ...] = ()

    def __len__(self):
        return len(self.nodes)

    @property
    def order(self) -> list[int]:
        return topological_order(self.nodes, self.edges)

    def to_dict(self) -> dict:
        return {"provider": self.provider, "nodes": list(self.nodes),
                "heads": list(self.heads), "tails": list(self.tails)}


SubmodelMap = dict[str, list[SecuritySubmodel]]


def find_submodels(nodes: Iterable[int], edges: Iterable[tuple[int, int]],
                   provider_of: Mapping[int, str],
                   providers: Iterable[str] | None = None) -> SubmodelMap:
    """Connected same-provider components of a provider-labelled DAG.

    Every provider in `providers` gets an entry, empty when it hosts no
    node. Components are listed by their smallest node id.
    """
    nodes = list(nodes)
    edges = list(edges)

    # Stage 1
    groups: SubmodelMap = {p: [] for p in (providers or ())}
    for n in nodes:
        groups.setdefault(provider_of[n], [])

    # Stage 2: adjacency restricted to edges inside one provider
    local = [(a, b) for a, b in edges if provider_of[a] == provider_of[b]]
    neighbours: dict[int, list[int]] = {n: [] for n in nodes}
    for a, b in local:
        neighbours[a].append(b)
        neighbours[b].append(a)

    component_of: dict[int, int] = {}
    members: list[list[int]] = []
    for start in sorted(nodes):
        if start in component_of:
            continue
        cid = len(members)
        component_of[start] = cid
        queue = deque([start])
        found = []
        while queue:
            n = queue.popleft()
            found.append(n)
            for m in neighbours[n]:
                if m not in component_of:
                    component_of[m] = cid
                    queue.append(m)
        members.append(found)

    # Stage 3
    has_in, has_out = set(), set()
    inner_edges: list[list[tuple[int, int]]] = [[] for _ in members]
    for a, b in local:
        has_out.add(a)
        has_in.add(b)
        inner_edges[component_of[a]].append((a, b))

    for cid, found in enumerate(members):
        ids = tuple(sorted(found))
        provider = provider_of[ids[0]]
        groups[provider].append(SecuritySubmodel(
            provider, ids,
            heads=tuple(n for n in ids if n not in has_in),
            tails=tuple(n for n in ids if n not in has_out),
            edges=tuple(sorted(inner_edges[cid])),
        ))
    return groups


def find_security_submodels(model, providers: Iterable[str] | None = None) -> SubmodelMap:
    """Submodel map of a materialized model."""
    provider_of = {n: model.provider_of(n) for n in model.nodes}
    return find_submodels(model.nodes, model.edges, provider_of, providers)


def all_submodels(smap: SubmodelMap) -> list[SecuritySubmodel]:
    return [sm for provider in sorted(smap) for sm in smap[provider]]
