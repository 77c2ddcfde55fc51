"""
design_env.py - Entorno Gymnasium sobre el espacio de diseños.

One environment step = one complete design. The action is the flat
decision vector the controller emits

    [arch_1, provider_1, arch_2, provider_2, ...]     (provider search)
    [arch_1, arch_2, ...]                              (provider pinned)

and the step trains and scores the design through an evaluator. The env
reward is the baseline-free score acc + lambda * sec_mec; the search loop
adds the moving-average baseline itself.

Evaluators:
    QuantumEvaluator  materialize, train, run on the fleet, measure security
    TabularEvaluator  seeded lookup tables, no quantum work (search harness)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import gymnasium as gym
import numpy as np
from gymnasium import spaces

from model.backbone import BackboneGraph, build_backbone
from model.design import EmptyModel, Model, ModelDesign, NoDataPath, materialize
from model.inference import accuracy
from model.trainer import TrainConfig, train
from security.evaluator import measure_security
from settings import (
    BACKBONE_DEPTH, DEFAULT_SHOTS, N_TEMPLATES, SEARCH_LAMBDA, SEARCH_WORKERS,
)

log = logging.getLogger("splitq.search")


@dataclass
class Evaluation:
    acc: float
    sec_mec: float
    sec_acc: float = 0.0
    n_nodes: int = 0
    n_providers: int = 0
    model: Model | None = None

    @classmethod
    def empty(cls) -> "Evaluation":
        return cls(0.0, 0.0)


class QuantumEvaluator:
    """Full pipeline for one design: train locally, deploy on the fleet, attack."""

    def __init__(self, trainset, testset, fleet, train_config: TrainConfig | None = None,
                 shots=DEFAULT_SHOTS, workers: int = SEARCH_WORKERS):
        self.trainset = trainset
        self.testset = testset
        self.fleet = fleet
        self.train_config = train_config or TrainConfig()
        self.shots = shots
        self.workers = workers

    def __call__(self, design: ModelDesign, seed: int) -> Evaluation:
        try:
            model = materialize(design.backbone, design.arch, design.provider, seed,
                                n_classes=self.testset.n_classes, device_map=design.device)
        except (EmptyModel, NoDataPath) as e:
            log.debug("design scored 0: %s", e)
            return Evaluation.empty()
        model = train(model, self.trainset, self.train_config, seed)
        acc = accuracy(model, self.testset, self.fleet.env(self.shots, seed))
        n_providers = len(model.design.providers_used)
        if acc <= 0.0:
            return Evaluation(0.0, 0.0, 0.0, len(model.nodes), n_providers, model)
        report = measure_security(model, self.testset, self.fleet.profiles, self.shots, seed,
                                  acc_model=acc, workers=self.workers)
        return Evaluation(acc, report.sec_mec, report.sec_acc, report.n_nodes,
                          report.n_providers, model)


class TabularEvaluator:
    """Seeded stand-in objective for exercising the search loop.

    acc     mean over backbone nodes of a (node, template) table, pruned
            nodes read the empty column; one template is best everywhere
    sec_mec mean over active nodes of a (node, provider) table, zero
            when a single provider hosts everything
    """

    def __init__(self, n_nodes: int, n_providers: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.best_template = int(rng.integers(1, N_TEMPLATES))
        self.acc_table = rng.uniform(0.0, 0.6, (n_nodes + 1, N_TEMPLATES))
        self.acc_table[:, 0] = rng.uniform(0.0, 0.3, n_nodes + 1)
        self.acc_table[:, self.best_template] = 1.0
        self.sec_table = rng.uniform(-0.3, 0.3, (n_nodes + 1, n_providers))
        self.sec_table[np.arange(n_nodes + 1), rng.integers(0, n_providers, n_nodes + 1)] = 0.5
        self.providers: list[str] = []

    def __call__(self, design: ModelDesign, seed: int) -> Evaluation:
        active = design.active_nodes
        if not active:
            return Evaluation.empty()
        keep = set(active)
        acc = float(np.mean([self.acc_table[n, design.arch[n] if n in keep else 0]
                             for n in design.backbone.nodes]))
        used = sorted({design.provider[n] for n in active})
        sec = 0.0
        if len(used) > 1:
            index = {p: i for i, p in enumerate(self.providers)}
            sec = float(np.mean([self.sec_table[n, index[design.provider[n]]] for n in active]))
        return Evaluation(acc, sec, acc * (1.0 - sec), len(active), len(used))


class DesignSpaceEnv(gym.Env):
    """Single-step environment: action = whole design."""

    metadata = {"render_modes": []}

    def __init__(self, evaluator, providers: Sequence[str], depth: int = BACKBONE_DEPTH,
                 lam: float = SEARCH_LAMBDA, pinned_provider: str | None = None):
        super().__init__()
        if lam <= 0:
            raise ValueError(f"lambda must be positive, got {lam}")
        self.evaluator = evaluator
        self.providers = list(providers)
        if pinned_provider is not None and pinned_provider not in self.providers:
            raise ValueError(f"provider {pinned_provider!r} is not in the fleet {self.providers}")
        self.pinned_provider = pinned_provider
        self.backbone: BackboneGraph = build_backbone(depth)
        self.lam = lam
        if isinstance(evaluator, TabularEvaluator):
            evaluator.providers = self.providers

        n = len(self.backbone.nodes)
        per_node = [N_TEMPLATES] if pinned_provider else [N_TEMPLATES, len(self.providers)]
        self.action_space = spaces.MultiDiscrete(per_node * n)
        self.observation_space = spaces.Discrete(1)
        self.eval_seed = 0             # seed handed to the evaluator on the next step

    @property
    def n_nodes(self) -> int:
        return len(self.backbone.nodes)

    def decode(self, action) -> ModelDesign:
        action = [int(a) for a in action]
        nodes = list(self.backbone.nodes)
        if self.pinned_provider:
            arch = dict(zip(nodes, action))
            provider = {n: self.pinned_provider for n in nodes}
        else:
            arch = {n: action[2 * i] for i, n in enumerate(nodes)}
            provider = {n: self.providers[action[2 * i + 1]] for i, n in enumerate(nodes)}
        return ModelDesign(self.backbone, arch, provider)

    def reset(self, *, seed=None, options=None):
        super().reset(seed=seed)
        if seed is not None:
            self.action_space.seed(seed)
        return 0, {}

    def step(self, action):
        design = self.decode(action)
        ev = self.evaluator(design, self.eval_seed)
        score = ev.acc + self.lam * ev.sec_mec
        return 0, score, True, False, {"design": design, "evaluation": ev}
