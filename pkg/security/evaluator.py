"""
evaluator.py - Submodel accuracy and the security metric.

    SecAcc(M) = max over submodels sm and utilized devices q of ACC(sm, q)
    SecMec(M) = 1 - SecAcc(M) / Acc(M)

A submodel is scored by feeding the raw data encoder into every input it
is missing and averaging its tail outputs, on a device of its provider.
The value is never clamped: a noisy submodel that beats the full model
gives a negative SecMec.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from model.design import Model
from model.inference import DeviceEnv, ExecutionEnv, accuracy, plan_accuracy, plan_subset
from qsim.simulator import NoiseSpec
from security.submodels import SecuritySubmodel, all_submodels, find_security_submodels
from settings import DEFAULT_SHOTS, EVAL_CAP, SEARCH_WORKERS

log = logging.getLogger("splitq.security")


class DegenerateModel(ValueError):
    """Full-model accuracy is zero, so the ratio is undefined."""


def sec_mec(acc_model: float, submodel_accs: Sequence[float]) -> float:
    """1 - max(submodel_accs) / acc_model."""
    if acc_model <= 0.0:
        raise DegenerateModel(f"model accuracy {acc_model} leaves SecMec undefined")
    if len(submodel_accs) == 0:
        raise ValueError("no submodel accuracies")
    return 1.0 - max(submodel_accs) / acc_model


def evaluate_submodel(sm: SecuritySubmodel, model: Model, dataset, device: NoiseSpec,
                      shots=DEFAULT_SHOTS, seed: int = 0, cap: int | None = EVAL_CAP) -> float:
    """ACC(sm, q): heads get D(X) for every missing parent, logits from the tails."""
    plan = plan_subset(model, sm.nodes, sm.tails)
    return plan_accuracy(plan, dataset, DeviceEnv(device, shots, seed), cap)


@dataclass
class SubmodelScore:
    provider: str
    device: str
    nodes: tuple[int, ...]
    acc: float

    def to_dict(self) -> dict:
        return {"provider": self.provider, "device": self.device,
                "nodes": list(self.nodes), "acc": self.acc}


@dataclass
class SecurityReport:
    acc: float
    sec_acc: float
    sec_mec: float
    submodels: list[SubmodelScore] = field(default_factory=list)
    n_providers: int = 0
    n_nodes: int = 0

    def to_dict(self) -> dict:
        return {"acc": self.acc, "sec_acc": self.sec_acc, "sec_mec": self.sec_mec,
                "n_providers": self.n_providers, "n_nodes": self.n_nodes,
                "submodels": [s.to_dict() for s in self.submodels]}

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def utilized_devices(model: Model, profiles: Mapping) -> dict[str, list[str]]:
    """Devices each provider actually runs for this model (QS)."""
    used: dict[str, set] = {}
    for n in model.nodes:
        provider = model.provider_of(n)
        device = model.device_of(n) or profiles[provider].default_device
        used.setdefault(provider, set()).add(device)
    return {p: sorted(d) for p, d in used.items()}


def measure_security(model: Model, dataset, profiles: Mapping, shots=DEFAULT_SHOTS,
                     seed: int = 0, acc_model: float | None = None,
                     env: ExecutionEnv | None = None, workers: int = SEARCH_WORKERS,
                     cap: int | None = EVAL_CAP) -> SecurityReport:
    """Full security report for a model deployed on `profiles`.

    `acc_model` is measured with `env` (usually the distributed fleet) when
    not given. Submodel evaluations run on a bounded thread pool.
    """
    if acc_model is None:
        if env is None:
            raise ValueError("measure_security needs acc_model or an execution env")
        acc_model = accuracy(model, dataset, env, cap)

    smap = find_security_submodels(model)
    devices = utilized_devices(model, profiles)
    if len(smap) == 1:
        # a lone provider holds every node, pruned fragments included
        provider = next(iter(smap))
        whole = SubmodelScore(provider, devices[provider][0], tuple(model.nodes), acc_model)
        return SecurityReport(acc_model, acc_model, sec_mec(acc_model, [acc_model]), [whole],
                              n_providers=1, n_nodes=len(model.nodes))

    tasks = [(sm, q) for sm in all_submodels(smap) for q in devices[sm.provider]]

    def score(task):
        sm, q = task
        acc = evaluate_submodel(sm, model, dataset, profiles[sm.provider].noise(q), shots, seed, cap)
        return SubmodelScore(sm.provider, q, sm.nodes, acc)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        scores = list(pool.map(score, tasks))

    sec_acc = max(s.acc for s in scores)
    value = sec_mec(acc_model, [s.acc for s in scores])
    log.debug("acc=%.4f sec_acc=%.4f sec_mec=%.4f over %d submodel runs",
              acc_model, sec_acc, value, len(scores))
    return SecurityReport(acc_model, sec_acc, value, scores,
                          n_providers=len(smap), n_nodes=len(model.nodes))
