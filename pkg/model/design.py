"""
design.py - Model designs and their materialization into trainable models.

A ModelDesign assigns every backbone node a template id and a provider
(optionally a device of that provider). Materializing a design removes the
empty nodes together with their edges, then the nodes that no longer have
a data path from an entry node, and draws the parameters of what remains.

JSON form:
    {"backbone_depth": 3, "arch": {"1": 3, ...}, "provider": {"1": "qcp1", ...},
     "device": {"1": "b1", ...}}
A trained model adds "n_classes" and "params": {"1": [...], ...}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from arch.templates import get_template
from model.backbone import BackboneGraph, topological_order


class InvalidDesign(ValueError):
    """Design maps do not cover the backbone or hold bad values."""


class EmptyModel(ValueError):
    """Every node of the design has the empty template."""


class NoDataPath(ValueError):
    """No entry node is active, so no node can receive data."""


DATA = "data"     # input segment fed by the data encoder


def _int_keys(mapping: Mapping, what: str) -> dict:
    try:
        return {int(k): v for k, v in mapping.items()}
    except (AttributeError, TypeError, ValueError) as e:
        raise InvalidDesign(f"bad {what} map: {e}") from e


@dataclass
class ModelDesign:
    backbone: BackboneGraph
    arch: dict[int, int]
    provider: dict[int, str]
    device: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        self.arch = {int(k): int(v) for k, v in self.arch.items()}
        self.provider = {int(k): str(v) for k, v in self.provider.items()}
        self.device = {int(k): str(v) for k, v in self.device.items()}

    @property
    def active_nodes(self) -> list[int]:
        return active_nodes(self.backbone, self.arch)

    @property
    def connectivity(self) -> list[tuple[int, int]]:
        """Backbone edges between active nodes (the searched L)."""
        keep = set(self.active_nodes)
        return [(a, b) for a, b in self.backbone.edges if a in keep and b in keep]

    @property
    def providers_used(self) -> list[str]:
        return sorted({self.provider[n] for n in self.active_nodes})

    def to_dict(self) -> dict:
        out = dict(self.backbone.to_dict())
        out["arch"] = {str(k): v for k, v in sorted(self.arch.items())}
        out["provider"] = {str(k): v for k, v in sorted(self.provider.items())}
        if self.device:
            out["device"] = {str(k): v for k, v in sorted(self.device.items())}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ModelDesign":
        if "arch" not in data or "provider" not in data:
            raise InvalidDesign("design needs 'arch' and 'provider' maps")
        return cls(BackboneGraph.from_dict(data),
                   _int_keys(data["arch"], "arch"),
                   _int_keys(data["provider"], "provider"),
                   _int_keys(data.get("device", {}), "device"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def active_nodes(backbone: BackboneGraph, arch: Mapping[int, int]) -> list[int]:
    """Non-empty nodes that still receive data from an entry node."""
    live = {n for n in backbone.nodes if arch.get(n, 0) != 0}
    reached = {n for n in backbone.entry_nodes if n in live}
    for n in topological_order(backbone.nodes, backbone.edges):
        if n in reached:
            for m in backbone.consumers(n):
                if m in live:
                    reached.add(m)
    return sorted(reached)


@dataclass
class Model:
    design: ModelDesign
    params: dict[int, np.ndarray]
    topo_order: list[int]
    sinks: list[int]
    n_classes: int = 2

    @property
    def nodes(self) -> list[int]:
        return sorted(self.topo_order)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return self.design.connectivity

    def inputs(self, node: int) -> list:
        """Input segments of a node: DATA for entry nodes, else its active parents."""
        if node in self.design.backbone.entry_nodes:
            return [DATA]
        keep = set(self.topo_order)
        return [p for p in self.design.backbone.parents(node) if p in keep]

    def provider_of(self, node: int) -> str:
        return self.design.provider[node]

    def device_of(self, node: int) -> str | None:
        return self.design.device.get(node)

    def template_of(self, node: int) -> int:
        return self.design.arch[node]

    @property
    def n_params(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def copy(self) -> "Model":
        return Model(self.design, {k: v.copy() for k, v in self.params.items()},
                     list(self.topo_order), list(self.sinks), self.n_classes)

    def to_dict(self) -> dict:
        out = self.design.to_dict()
        out["n_classes"] = self.n_classes
        out["params"] = {str(k): [float(x) for x in v] for k, v in sorted(self.params.items())}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Model":
        design = ModelDesign.from_dict(data)
        n_classes = int(data.get("n_classes", 2))
        model = materialize(design.backbone, design.arch, design.provider,
                            seed=0, n_classes=n_classes, device_map=design.device)
        if "params" in data:
            raw = _int_keys(data["params"], "params")
            for node in model.topo_order:
                if node not in raw:
                    raise InvalidDesign(f"params missing for node {node}")
                vec = np.asarray(raw[node], dtype=float)
                if vec.shape != model.params[node].shape:
                    raise InvalidDesign(
                        f"node {node}: {vec.size} params, template needs {model.params[node].size}")
                model.params[node] = vec
        return model


def materialize(backbone: BackboneGraph, arch_map: Mapping[int, int],
                provider_map: Mapping[int, str], seed: int, n_classes: int = 2,
                device_map: Mapping[int, str] | None = None) -> Model:
    """Prune the design and draw parameters U[-pi, pi] from `seed`.

    The returned model's design marks pruned nodes with template 0, so
    materializing it again yields the same model.
    """
    arch = {int(k): int(v) for k, v in arch_map.items()}
    missing = [n for n in backbone.nodes if n not in arch]
    if missing:
        raise InvalidDesign(f"arch map misses nodes {missing}")
    for n, t in arch.items():
        get_template(t)

    if all(arch[n] == 0 for n in backbone.nodes):
        raise EmptyModel("all nodes have the empty template")
    if not any(arch[n] != 0 for n in backbone.entry_nodes):
        raise NoDataPath("no entry node is active")

    active = active_nodes(backbone, arch)
    providers = {int(k): str(v) for k, v in provider_map.items()}
    unassigned = [n for n in active if n not in providers]
    if unassigned:
        raise InvalidDesign(f"provider map misses active nodes {unassigned}")
    devices = {int(k): str(v) for k, v in (device_map or {}).items()}

    design = ModelDesign(
        backbone,
        {n: (arch[n] if n in active else 0) for n in backbone.nodes},
        {n: providers[n] for n in backbone.nodes if n in providers},
        {n: d for n, d in devices.items() if n in active},
    )
    keep = set(active)
    edges = [(a, b) for a, b in backbone.edges if a in keep and b in keep]
    order = topological_order(active, edges)
    sources = {a for a, _ in edges}
    sinks = [n for n in active if n not in sources]

    rng = np.random.default_rng(seed)
    params = {n: rng.uniform(-np.pi, np.pi, get_template(arch[n]).n_params) for n in active}
    return Model(design, params, order, sinks, n_classes)
