"""
inference.py - Node execution plans, execution environments and forward passes.

An ExecutionPlan is the list of nodes to run in topological order, each
with its input segments (raw features or a parent's output) and its
instantiated template, plus the nodes whose outputs form the logits. The
full model and every security submodel run through the same plan runner,
so a submodel covering the whole model scores exactly like the model.

Environments decide where node circuits run:

    LocalEnv        exact noiseless statevector (training, reference)
    DeviceEnv       one simulated device, density matrix + shots
    DistributedEnv  provider daemons, see networking/dispatch.py
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from arch.encoders import (
    data_encoder, data_encoder_ops, intermediate_encoder, intermediate_encoder_ops,
)
from arch.templates import instantiate_template
from qsim import batch
from qsim.circuit import Circuit
from qsim.simulator import IDEAL, NoiseSpec, check_shots, expectations_z, simulate_noisy, simulate_pure
from settings import DEFAULT_SHOTS, EVAL_CAP, NODE_QUBITS
from model.design import DATA, Model
from utils.helpers import derive_seed


class ExecutionError(RuntimeError):
    """A node could not be executed (distributed mode)."""

    def __init__(self, message: str, node: int | None = None):
        super().__init__(message)
        self.node = node


# ──────────────────────────────────────────────
# Plans
# ──────────────────────────────────────────────
@dataclass(frozen=True)
class NodePlan:
    node: int
    segments: tuple                 # DATA or parent node id, in stacking order
    body: Circuit                   # instantiated template
    provider: str = ""
    device: str | None = None


@dataclass(frozen=True)
class ExecutionPlan:
    nodes: tuple[NodePlan, ...]     # topological order
    outputs: tuple[int, ...]        # nodes averaged into the logits
    n_classes: int

    def levels(self) -> list[list[NodePlan]]:
        """Nodes grouped so every node only depends on earlier groups."""
        depth: dict[int, int] = {}
        for n in self.nodes:
            parents = [s for s in n.segments if s != DATA]
            depth[n.node] = 1 + max((depth[p] for p in parents), default=-1)
        groups: dict[int, list[NodePlan]] = {}
        for n in self.nodes:
            groups.setdefault(depth[n.node], []).append(n)
        return [groups[d] for d in sorted(groups)]

    @property
    def node_ids(self) -> list[int]:
        return [n.node for n in self.nodes]


def _node_plan(model: Model, node: int, segments) -> NodePlan:
    body = instantiate_template(model.template_of(node), model.params[node])
    return NodePlan(node, tuple(segments), body, model.provider_of(node), model.device_of(node))


def plan_model(model: Model) -> ExecutionPlan:
    nodes = tuple(_node_plan(model, n, model.inputs(n)) for n in model.topo_order)
    return ExecutionPlan(nodes, tuple(model.sinks), model.n_classes)


def plan_subset(model: Model, nodes: Sequence[int], outputs: Sequence[int]) -> ExecutionPlan:
    """Plan for a node subset. Inputs coming from outside the subset are
    replaced, one for one, by the data encoder."""
    keep = set(nodes)
    plans = []
    for n in model.topo_order:
        if n not in keep:
            continue
        segments = [s if s == DATA or s in keep else DATA for s in model.inputs(n)]
        plans.append(_node_plan(model, n, segments))
    return ExecutionPlan(tuple(plans), tuple(sorted(outputs)), model.n_classes)


def node_circuit(plan: NodePlan, features, outputs: dict[int, np.ndarray]) -> Circuit:
    """Encoder segments followed by the node's template."""
    ops = []
    for seg in plan.segments:
        if seg == DATA:
            ops.extend(data_encoder(features).ops)
        else:
            ops.extend(intermediate_encoder([outputs[seg]]).ops)
    ops.extend(plan.body.ops)
    return Circuit(NODE_QUBITS, ops)


def head(plan: ExecutionPlan, outputs: dict[int, np.ndarray]) -> np.ndarray:
    """Mean of the output nodes, truncated to the class count."""
    stacked = np.stack([outputs[n] for n in plan.outputs])
    return stacked.mean(axis=0)[..., :plan.n_classes]


# ──────────────────────────────────────────────
# Environments
# ──────────────────────────────────────────────
@dataclass(frozen=True)
class NodeJob:
    node: int
    circuit: Circuit
    provider: str
    device: str | None
    seed: int


class ExecutionEnv:
    """Runs the node circuits of one plan level."""

    exact = False
    seed = 0

    def run_level(self, jobs: Sequence[NodeJob]) -> list[np.ndarray]:
        raise NotImplementedError


class LocalEnv(ExecutionEnv):
    exact = True

    def run_level(self, jobs):
        return [expectations_z(simulate_pure(job.circuit)) for job in jobs]


@dataclass
class DeviceEnv(ExecutionEnv):
    """Every node runs on one simulated device."""
    noise: NoiseSpec = IDEAL
    shots: object = DEFAULT_SHOTS
    seed: int = 0

    def __post_init__(self):
        check_shots(self.shots)

    def run_level(self, jobs):
        return [simulate_noisy(job.circuit, self.noise, self.shots, job.seed) for job in jobs]


LOCAL = LocalEnv()


# ──────────────────────────────────────────────
# Forward
# ──────────────────────────────────────────────
def run_plan(plan: ExecutionPlan, features, env: ExecutionEnv = LOCAL,
             sample_index: int = 0) -> np.ndarray:
    """Logits for one sample. Job seeds derive from (env seed, sample, node)."""
    outputs: dict[int, np.ndarray] = {}
    for level in plan.levels():
        jobs = [NodeJob(n.node, node_circuit(n, features, outputs), n.provider, n.device,
                        derive_seed(env.seed, sample_index, n.node))
                for n in level]
        for job, values in zip(jobs, env.run_level(jobs)):
            outputs[job.node] = np.asarray(values, dtype=float)
    return head(plan, outputs)


def run_plan_batch(plan: ExecutionPlan, features: np.ndarray) -> np.ndarray:
    """Exact noiseless logits for a (B, 16) feature matrix."""
    features = np.atleast_2d(np.asarray(features, dtype=float))
    size = features.shape[0]
    data_ops = data_encoder_ops(features)
    outputs: dict[int, np.ndarray] = {}
    for n in plan.nodes:
        ops = []
        for seg in n.segments:
            ops.extend(data_ops if seg == DATA else intermediate_encoder_ops([outputs[seg]]))
        ops.extend(batch.from_circuit(n.body))
        outputs[n.node] = batch.expectations(NODE_QUBITS, ops, size)
    return head(plan, outputs)


def forward(model: Model, features, env: ExecutionEnv = LOCAL, sample_index: int = 0) -> np.ndarray:
    """Logits of one sample; nodes run in topological order."""
    return run_plan(plan_model(model), features, env, sample_index)


def forward_batch(model: Model, features: np.ndarray) -> np.ndarray:
    return run_plan_batch(plan_model(model), features)


# ──────────────────────────────────────────────
# Accuracy
# ──────────────────────────────────────────────
def plan_accuracy(plan: ExecutionPlan, dataset, env: ExecutionEnv = LOCAL,
                  cap: int | None = EVAL_CAP) -> float:
    """argmax(logits) == label over the first `cap` samples."""
    features, labels = dataset.features, dataset.labels
    if cap is not None:
        features, labels = features[:cap], labels[:cap]
    if len(labels) == 0:
        raise ValueError("cannot score an empty dataset")
    if env.exact:
        logits = run_plan_batch(plan, features)
    else:
        logits = np.stack([run_plan(plan, x, env, i) for i, x in enumerate(features)])
    return float(np.mean(np.argmax(logits, axis=1) == labels))


def accuracy(model: Model, dataset, env: ExecutionEnv = LOCAL, cap: int | None = EVAL_CAP) -> float:
    return plan_accuracy(plan_model(model), dataset, env, cap)
