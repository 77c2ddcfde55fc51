"""
attack.py - Robo del circuito del modelo a partir de lo que ve un proveedor.

A provider that executes a node receives the compiled circuit

    C(theta) . D(Z)

where D(Z) is the encoder prefix for the query Z. An attacker who knows
Z and the encoder rule appends D(Z)^-1 and cancels the prefix, leaving
the model circuit C(theta). Nothing here talks to the provider: the
attack only reads circuit logs (in-memory or the daemon's JSONL file).

Node circuits are split by peeling, from the front, the encoder blocks
the attacker can account for:

    data      D(Z) for the known query features
    own       RY layer of an output this provider itself returned
    foreign   any other RY layer (intermediate values from another
              provider; the attacker substitutes D(X) when replaying)

until the remainder has the gate structure of a catalog template.
Compilation is assumed to keep gate order.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from arch.encoders import data_encoder, intermediate_encoder
from arch.templates import instantiate_template, match_template
from model.backbone import topological_order
from model.design import DATA, Model
from model.inference import DeviceEnv, ExecutionPlan, NodePlan, plan_accuracy
from qsim.circuit import ROTATIONS, Circuit, Gate, GateOp, InvalidCircuit, invert
from qsim.simulator import circuit_unitary, simulate_noisy
from security.submodels import find_submodels
from settings import (
    ATTACK_ACC_TOL, DEFAULT_SHOTS, EVAL_CAP, FIDELITY_MAX_QUBITS, NODE_QUBITS, PROBE_MATCH_TOL,
)

log = logging.getLogger("splitq.redteam")

FOREIGN = "foreign"     # segment fed by another provider's node

_JOB_ID = re.compile(r"^s(?P<seed>\d+)-n(?P<node>\d+)$")


class RecoveryError(ValueError):
    """A logged circuit does not split into a known probe and a template."""


# ──────────────────────────────────────────────
# Core attack
# ──────────────────────────────────────────────
def steal(compiled: Circuit, probe: Circuit) -> Circuit:
    """C(theta) from C(theta).D(Z): run D(Z)^-1 first, then cancel.

    Only pairs across the probe boundary cancel, so the body keeps its own
    gates (zero rotations included) and its template structure.
    """
    if compiled.n_qubits != probe.n_qubits:
        raise InvalidCircuit(f"width mismatch: {compiled.n_qubits} vs {probe.n_qubits}")
    stack = list(invert(probe).ops)
    body: list[GateOp] = []
    for op in compiled.ops:
        if stack and not body and stack[-1].is_inverse_of(op, PROBE_MATCH_TOL):
            stack.pop()
        else:
            body.append(op)
    return Circuit(compiled.n_qubits, stack + body)


def unitary_fidelity(a: Circuit, b: Circuit) -> float:
    """|tr(Ua^dagger Ub)| / 2^n, 1.0 for equal circuits up to global phase."""
    if a.n_qubits != b.n_qubits:
        raise InvalidCircuit(f"width mismatch: {a.n_qubits} vs {b.n_qubits}")
    if a.n_qubits > FIDELITY_MAX_QUBITS:
        raise InvalidCircuit(
            f"width {a.n_qubits} too large for dense unitaries (max {FIDELITY_MAX_QUBITS})")
    ua = circuit_unitary(a)
    ub = circuit_unitary(b)
    overlap = abs(np.trace(ua.conj().T @ ub)) / ua.shape[0]
    return float(min(1.0, overlap))


# ──────────────────────────────────────────────
# Provider logs
# ──────────────────────────────────────────────
@dataclass(frozen=True)
class LoggedJob:
    job_id: str
    node: int
    circuit: Circuit
    device: str
    shots: object
    seed: int

    @classmethod
    def from_entry(cls, entry: Mapping) -> "LoggedJob":
        try:
            job_id = str(entry["job_id"])
            circuit = Circuit.from_dict(entry["circuit"])
            device = str(entry["device"])
            shots = entry["shots"]
            seed = int(entry["seed"])
        except (KeyError, TypeError, ValueError) as e:
            raise RecoveryError(f"bad log entry: {e}") from e
        m = _JOB_ID.match(job_id)
        if m is None:
            raise RecoveryError(f"job id {job_id!r} does not name a node")
        return cls(job_id, int(m.group("node")), circuit, device, shots, seed)


def read_circuit_log(path: str) -> list[dict]:
    """Entries of a provider daemon's JSONL log, in arrival order."""
    entries = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                entries.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise RecoveryError(f"{path}:{lineno}: {e}") from e
    return entries


def _same_ops(ops: Sequence[GateOp], ref: Sequence[GateOp], tol: float = PROBE_MATCH_TOL) -> bool:
    if len(ops) != len(ref):
        return False
    for a, b in zip(ops, ref):
        if a.kind != b.kind or a.qubits != b.qubits:
            return False
        if any(abs(x - y) > tol for x, y in zip(a.params, b.params)):
            return False
    return True


def _is_ry_layer(ops: Sequence[GateOp]) -> bool:
    return (len(ops) == NODE_QUBITS
            and all(op.kind == Gate.RY and op.qubits == (q,) for q, op in enumerate(ops)))


def peel_probe(compiled: Circuit, features, own_outputs: Mapping[int, np.ndarray]
               ) -> tuple[Circuit, tuple]:
    """Encoder prefix of a node circuit and the segment each block came from.

    Returns (probe, segments) with segments holding DATA, an own node id
    or FOREIGN, in circuit order.
    """
    ops = compiled.ops
    data_ops = data_encoder(features).ops
    own_ops = {n: intermediate_encoder([v]).ops for n, v in sorted(own_outputs.items())}
    segments = []
    i = 0
    while True:
        if segments and match_template(Circuit(compiled.n_qubits, ops[i:])) is not None:
            break
        if _same_ops(ops[i:i + len(data_ops)], data_ops):
            segments.append(DATA)
            i += len(data_ops)
            continue
        block = ops[i:i + NODE_QUBITS]
        owner = next((n for n, ref in own_ops.items() if _same_ops(block, ref)), None)
        if owner is not None:
            segments.append(owner)
        elif _is_ry_layer(block):
            segments.append(FOREIGN)
        else:
            raise RecoveryError(f"no known encoder block at op {i} of a {len(ops)}-op circuit")
        i += NODE_QUBITS
    return Circuit(compiled.n_qubits, list(ops[:i])), tuple(segments)


@dataclass
class RecoveredNode:
    node: int
    provider: str
    device: str
    segments: tuple
    template: int
    params: np.ndarray
    body: Circuit = field(repr=False)

    def plan(self) -> NodePlan:
        """Replayable node: foreign inputs get the data encoder."""
        segments = tuple(DATA if s == FOREIGN else s for s in self.segments)
        return NodePlan(self.node, segments, self.body, self.provider, self.device)

    def to_dict(self) -> dict:
        return {"node": self.node, "provider": self.provider, "device": self.device,
                "segments": [s if isinstance(s, str) else int(s) for s in self.segments],
                "template": self.template, "params": [float(p) for p in self.params]}


def recover_provider(entries: Iterable[Mapping], profile, features) -> list[RecoveredNode]:
    """Every node circuit in one provider's log, stripped of its probe.

    The log must start with the jobs of the query `features`; later
    jobs for an already recovered node are ignored. Own outputs are
    recomputed from the logged job, since the provider ran it.
    """
    recovered: list[RecoveredNode] = []
    outputs: dict[int, np.ndarray] = {}
    for entry in entries:
        job = LoggedJob.from_entry(entry)
        if job.node in outputs:
            continue
        probe, segments = peel_probe(job.circuit, features, outputs)
        body = steal(job.circuit, probe)
        template = match_template(body)
        if template is None:
            raise RecoveryError(f"node {job.node}: recovered body matches no template")
        params = np.array([op.params[0] for op in body.ops if op.kind in ROTATIONS])
        recovered.append(RecoveredNode(job.node, profile.provider, job.device, segments,
                                       template, params, instantiate_template(template, params)))
        outputs[job.node] = simulate_noisy(job.circuit, profile.noise(job.device),
                                           job.shots, job.seed)
    log.debug("%s: recovered %d node(s)", profile.provider, len(recovered))
    return recovered


# ──────────────────────────────────────────────
# Stolen submodels
# ──────────────────────────────────────────────
@dataclass
class StolenSubmodel:
    provider: str
    nodes: tuple[int, ...]
    tails: tuple[int, ...]
    plan: ExecutionPlan = field(repr=False)
    devices: tuple[str, ...] = ()


def own_edges(recovered: Sequence[RecoveredNode]) -> list[tuple[int, int]]:
    return sorted((s, r.node) for r in recovered for s in r.segments
                  if s not in (DATA, FOREIGN))


def assemble(recovered: Sequence[RecoveredNode], n_classes: int) -> list[StolenSubmodel]:
    """Connected pieces of one provider's recovered nodes, ready to replay."""
    if not recovered:
        return []
    by_node = {r.node: r for r in recovered}
    edges = own_edges(recovered)
    provider = recovered[0].provider
    devices = tuple(sorted({r.device for r in recovered}))
    smap = find_submodels(by_node, edges, {n: provider for n in by_node})
    stolen = []
    for sm in smap[provider]:
        order = topological_order(sm.nodes, sm.edges)
        plan = ExecutionPlan(tuple(by_node[n].plan() for n in order), sm.tails, n_classes)
        stolen.append(StolenSubmodel(provider, sm.nodes, sm.tails, plan, devices))
    return stolen


def stolen_accuracy(sub: StolenSubmodel, dataset, noise, shots=DEFAULT_SHOTS, seed: int = 0,
                    cap: int | None = EVAL_CAP) -> float:
    """Accuracy the attacker gets by running its stolen piece on its own device."""
    return plan_accuracy(sub.plan, dataset, DeviceEnv(noise, shots, seed), cap)


# ──────────────────────────────────────────────
# Demos
# ──────────────────────────────────────────────
def _query(model: Model, fleet, features, shots, seed) -> dict[str, list[dict]]:
    """Send one query through the fleet and snapshot every provider's log."""
    from networking.dispatch import execute_distributed

    fleet.clear_logs()
    execute_distributed(model, features, fleet, shots, seed)
    return {p: fleet.circuit_log(p) for p in model.design.providers_used}


@dataclass
class NodeTheft:
    node: int
    template: int
    fidelity: float

    def to_dict(self) -> dict:
        return {"node": self.node, "template": self.template, "fidelity": self.fidelity}


@dataclass
class SingleProviderAttack:
    provider: str
    nodes: list[NodeTheft]
    complete: bool

    @property
    def min_fidelity(self) -> float:
        return min((t.fidelity for t in self.nodes), default=0.0)

    def to_dict(self) -> dict:
        return {"provider": self.provider, "complete": self.complete,
                "min_fidelity": self.min_fidelity, "nodes": [t.to_dict() for t in self.nodes]}


def single_provider_attack(model: Model, profile, features, shots=DEFAULT_SHOTS, seed: int = 0,
                           entries: Sequence[Mapping] | None = None) -> SingleProviderAttack:
    """The provider hosting the whole model recovers every node circuit.

    Queries a loopback deployment unless the provider's log `entries`
    are given.
    """
    from networking.dispatch import Fleet

    used = model.design.providers_used
    if used != [profile.provider]:
        raise ValueError(f"model runs on {used}, not only on {profile.provider}")
    if entries is None:
        with Fleet.loopback([profile]) as fleet:
            entries = _query(model, fleet, features, shots, seed)[profile.provider]

    recovered = recover_provider(entries, profile, features)
    thefts = []
    for r in recovered:
        truth = instantiate_template(model.template_of(r.node), model.params[r.node])
        thefts.append(NodeTheft(r.node, r.template, unitary_fidelity(r.body, truth)))
    complete = (sorted(r.node for r in recovered) == model.nodes
                and own_edges(recovered) == sorted(model.edges))
    result = SingleProviderAttack(profile.provider, thefts, complete)
    log.info("%s stole %d/%d nodes, min fidelity %.12f", profile.provider, len(thefts),
             len(model.nodes), result.min_fidelity)
    return result


@dataclass
class SubmodelTheft:
    provider: str
    device: str
    nodes: tuple[int, ...]
    recovered_acc: float
    measured_acc: float | None

    @property
    def gap(self) -> float | None:
        if self.measured_acc is None:
            return None
        return abs(self.recovered_acc - self.measured_acc)

    def to_dict(self) -> dict:
        return {"provider": self.provider, "device": self.device, "nodes": list(self.nodes),
                "recovered_acc": self.recovered_acc, "measured_acc": self.measured_acc}


@dataclass
class DistributedAttack:
    acc: float
    sec_acc: float
    submodels: list[SubmodelTheft]

    @property
    def best_recovered(self) -> float:
        return max((s.recovered_acc for s in self.submodels), default=0.0)

    def consistent(self, tol: float = ATTACK_ACC_TOL) -> bool:
        """Every stolen piece scores like the security measurement says."""
        return all(s.gap is not None and s.gap <= tol for s in self.submodels)

    def to_dict(self) -> dict:
        return {"acc": self.acc, "sec_acc": self.sec_acc, "best_recovered": self.best_recovered,
                "submodels": [s.to_dict() for s in self.submodels]}


def distributed_attack(model: Model, fleet, dataset, features, shots=DEFAULT_SHOTS,
                       seed: int = 0, report=None, logs: Mapping[str, Sequence[Mapping]] | None = None,
                       cap: int | None = EVAL_CAP) -> DistributedAttack:
    """Every provider attacks on its own; each only gets its fragments.

    Recovered pieces are replayed on the provider's devices and set next
    to the security report's ACC(sm, q) for the same nodes and device.
    """
    from security.evaluator import measure_security

    if logs is None:
        logs = _query(model, fleet, features, shots, seed)
    if report is None:
        report = measure_security(model, dataset, fleet.profiles, shots, seed,
                                  env=fleet.env(shots, seed), cap=cap)
    measured = {(s.provider, s.device, tuple(s.nodes)): s.acc for s in report.submodels}

    rows = []
    for provider in sorted(logs):
        profile = fleet.profiles[provider]
        recovered = recover_provider(logs[provider], profile, features)
        for sub in assemble(recovered, model.n_classes):
            for device in sub.devices:
                acc = stolen_accuracy(sub, dataset, profile.noise(device), shots, seed, cap)
                rows.append(SubmodelTheft(provider, device, sub.nodes, acc,
                                          measured.get((provider, device, sub.nodes))))
    result = DistributedAttack(report.acc, report.sec_acc, rows)
    log.info("distributed attack: model acc %.4f, best stolen piece %.4f (sec_acc %.4f)",
             result.acc, result.best_recovered, result.sec_acc)
    return result
