"""
search.py - Security-aware design search and its baselines.

All three searches share one episode loop; only the sampler changes.

    run_search               LSTM controller, (template, provider) per node
    run_random_search        uniform samples from the same design space
    run_single_provider_nas  controller over templates, every node pinned
                             to one provider

Per episode: sample designs, score each (train, deploy, attack), compute

    R = mean over samples of (acc - b + lambda * sec_mec)

update the controller with R, then move b toward the episode accuracy.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from engine.controller import Controller, Trajectory, UpdateError
from engine.design_env import DesignSpaceEnv, Evaluation
from model.design import Model, ModelDesign
from model.trainer import TrainConfig
from settings import (
    BACKBONE_DEPTH, BASELINE_DECAY, BEST_ACC_JSON, BEST_SEC_JSON, CONTROLLER_LR, DEFAULT_FLEET_SIZE,
    DEFAULT_SHOTS, EPISODES_CSV, FAST_EPOCHS, FAST_TRAIN_SAMPLES, GRAD_CLIP_NORM, PARETO_JSON,
    RMSPROP_DECAY, SAMPLES_PER_EPISODE, SEARCH_EPISODES, SEARCH_LAMBDA, SEARCH_WORKERS,
)
from utils.helpers import derive_seed
from utils.timer import EpisodeTimer

log = logging.getLogger("splitq.search")

CSV_COLUMNS = ["episode", "acc", "sec_mec", "sec_acc", "reward", "baseline",
               "n_nodes", "n_providers", "design_json"]


@dataclass
class SearchConfig:
    episodes: int = SEARCH_EPISODES
    samples_per_episode: int = SAMPLES_PER_EPISODE
    lam: float = SEARCH_LAMBDA
    baseline_decay: float = BASELINE_DECAY
    rmsprop_decay: float = RMSPROP_DECAY
    controller_lr: float = CONTROLLER_LR
    grad_clip: float = GRAD_CLIP_NORM
    depth: int = BACKBONE_DEPTH
    fleet_size: int = DEFAULT_FLEET_SIZE
    dataset: str = "mnist2"
    shots: object = DEFAULT_SHOTS
    fast: bool = False
    workers: int = SEARCH_WORKERS
    seed: int = 0

    def __post_init__(self):
        if self.episodes < 1:
            raise ValueError(f"episodes must be >= 1, got {self.episodes}")
        if self.samples_per_episode < 1:
            raise ValueError(f"samples_per_episode must be >= 1, got {self.samples_per_episode}")
        if self.lam <= 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if not 0.0 <= self.baseline_decay < 1.0:
            raise ValueError(f"baseline decay must be in [0, 1), got {self.baseline_decay}")

    @property
    def train_config(self) -> TrainConfig:
        if self.fast:
            return TrainConfig(epochs=FAST_EPOCHS, train_samples=FAST_TRAIN_SAMPLES)
        return TrainConfig()


@dataclass
class EpisodeRecord:
    episode: int
    design: ModelDesign
    acc: float
    sec_mec: float
    reward: float
    baseline: float
    sec_acc: float = 0.0
    n_nodes: int = 0
    n_providers: int = 0
    sample: int = 0
    reward_lambda: float = SEARCH_LAMBDA
    model: Model | None = field(default=None, repr=False, compare=False)

    @property
    def score(self) -> float:
        """Baseline-free objective used to compare designs across runs."""
        return self.acc + self.reward_lambda * self.sec_mec

    def to_row(self) -> dict:
        return {"episode": self.episode, "acc": self.acc, "sec_mec": self.sec_mec,
                "sec_acc": self.sec_acc, "reward": self.reward, "baseline": self.baseline,
                "n_nodes": self.n_nodes, "n_providers": self.n_providers,
                "design_json": self.design.to_json()}

    def to_dict(self) -> dict:
        """Deployable artifact: the trained model when there is one, else the design."""
        out = self.model.to_dict() if self.model is not None else self.design.to_dict()
        out["metrics"] = {"episode": self.episode, "acc": self.acc, "sec_mec": self.sec_mec,
                          "sec_acc": self.sec_acc, "reward": self.reward,
                          "n_nodes": self.n_nodes, "n_providers": self.n_providers}
        return out


# ──────────────────────────────────────────────
# Reward and baseline
# ──────────────────────────────────────────────
def reward(records: Sequence[tuple[float, float]], b: float, lam: float) -> float:
    """Mean over (acc, sec_mec) pairs of acc - b + lam * sec_mec."""
    if len(records) == 0:
        raise ValueError("reward needs at least one record")
    return float(np.mean([acc - b + lam * sec for acc, sec in records]))


def update_baseline(b: float | None, acc: float, decay: float = BASELINE_DECAY) -> float:
    """Exponential moving average; the first observation initializes it."""
    if b is None:
        return float(acc)
    return decay * b + (1.0 - decay) * acc


# ──────────────────────────────────────────────
# Samplers
# ──────────────────────────────────────────────
class ControllerSampler:
    def __init__(self, controller: Controller, seed: int):
        self.controller = controller
        self.rng = np.random.default_rng(seed)

    def propose(self) -> tuple[list[int], Trajectory]:
        traj = self.controller.sample(self.rng)
        return list(traj.actions), traj

    def learn(self, trajectories: Sequence[Trajectory], r: float):
        for traj in trajectories:
            try:
                self.controller.update(traj.actions, r)
            except UpdateError:
                pass


class UniformSampler:
    def __init__(self, env: DesignSpaceEnv, seed: int):
        self.env = env
        env.reset(seed=seed)

    def propose(self) -> tuple[list[int], None]:
        return [int(a) for a in self.env.action_space.sample()], None

    def learn(self, trajectories, r: float):
        pass


# ──────────────────────────────────────────────
# Episode loop
# ──────────────────────────────────────────────
@dataclass
class SearchResult:
    method: str
    records: list[EpisodeRecord]
    episode_seconds: list[float] = field(default_factory=list)

    @property
    def best_acc(self) -> EpisodeRecord:
        return max(self.records, key=lambda r: (r.acc, r.sec_mec, -r.episode))

    @property
    def best_sec(self) -> EpisodeRecord:
        scored = [r for r in self.records if r.acc > 0] or self.records
        return max(scored, key=lambda r: (r.sec_mec, r.acc, -r.episode))

    @property
    def best_score(self) -> float:
        return max(r.score for r in self.records)

    @property
    def pareto(self) -> list[EpisodeRecord]:
        return pareto_front(self.records)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.to_row() for r in self.records], columns=CSV_COLUMNS)


def pareto_front(records: Sequence[EpisodeRecord]) -> list[EpisodeRecord]:
    """Designs no other design beats on both acc and sec_mec."""
    if not records:
        return []
    df = pd.DataFrame({"acc": [r.acc for r in records], "sec": [r.sec_mec for r in records],
                       "design": [r.design.to_json() for r in records], "i": range(len(records))})
    df = df.drop_duplicates(subset="design").sort_values(["acc", "sec", "i"],
                                                         ascending=[False, False, True])
    front, best_sec = [], -np.inf
    for row in df.itertuples():
        if row.sec > best_sec:
            front.append(records[row.i])
            best_sec = row.sec
    return front


def _run_episodes(env: DesignSpaceEnv, sampler, config: SearchConfig, method: str,
                  progress: bool = False) -> SearchResult:
    records: list[EpisodeRecord] = []
    timer = EpisodeTimer()
    b = None
    episodes = range(config.episodes)
    if progress:
        episodes = tqdm(episodes, desc=method, unit="ep")

    for ep in episodes:
        timer.start()
        batch: list[tuple[ModelDesign, Evaluation, Trajectory | None]] = []
        for s in range(config.samples_per_episode):
            action, traj = sampler.propose()
            env.eval_seed = derive_seed(config.seed, ep, s)
            _, _, _, _, info = env.step(action)
            batch.append((info["design"], info["evaluation"], traj))

        mean_acc = float(np.mean([ev.acc for _, ev, _ in batch]))
        if b is None:
            b = update_baseline(None, mean_acc)
        r = reward([(ev.acc, ev.sec_mec) for _, ev, _ in batch], b, config.lam)
        for s, (design, ev, _) in enumerate(batch):
            records.append(EpisodeRecord(
                ep, design, ev.acc, ev.sec_mec,
                reward=ev.acc - b + config.lam * ev.sec_mec, baseline=b,
                sec_acc=ev.sec_acc, n_nodes=ev.n_nodes, n_providers=ev.n_providers,
                sample=s, model=ev.model, reward_lambda=config.lam))
        sampler.learn([t for _, _, t in batch if t is not None], r)
        b = update_baseline(b, mean_acc, config.baseline_decay)

        elapsed = timer.complete_episode()
        log.debug("%s ep %d: acc=%.4f sec_mec=%.4f R=%.4f b=%.4f (%.2fs)", method, ep,
                  mean_acc, float(np.mean([ev.sec_mec for _, ev, _ in batch])), r, b, elapsed)

    result = SearchResult(method, records, list(timer.episode_times))
    best = result.best_acc
    log.info("%s: %d episodes in %s, best acc %.4f (sec_mec %.4f)", method, config.episodes,
             timer.formatted_total, best.acc, best.sec_mec)
    return result


def _controller(env: DesignSpaceEnv, config: SearchConfig, arch_only: bool) -> Controller:
    n_providers = 1 if arch_only else len(env.providers)
    return Controller(env.n_nodes, n_providers, arch_only=arch_only, lr=config.controller_lr,
                      decay=config.rmsprop_decay, clip=config.grad_clip, seed=config.seed)


def run_search(config: SearchConfig, evaluator, providers: Sequence[str],
               progress: bool = False) -> SearchResult:
    env = DesignSpaceEnv(evaluator, providers, config.depth, config.lam)
    sampler = ControllerSampler(_controller(env, config, arch_only=False), config.seed)
    return _run_episodes(env, sampler, config, "engine", progress)


def run_random_search(config: SearchConfig, evaluator, providers: Sequence[str],
                      progress: bool = False) -> SearchResult:
    env = DesignSpaceEnv(evaluator, providers, config.depth, config.lam)
    return _run_episodes(env, UniformSampler(env, config.seed), config, "random", progress)


def run_single_provider_nas(config: SearchConfig, evaluator, providers: Sequence[str],
                            provider_id: str, progress: bool = False) -> SearchResult:
    env = DesignSpaceEnv(evaluator, providers, config.depth, config.lam, pinned_provider=provider_id)
    sampler = ControllerSampler(_controller(env, config, arch_only=True), config.seed)
    return _run_episodes(env, sampler, config, f"nas-{provider_id}", progress)


# ──────────────────────────────────────────────
# Outputs
# ──────────────────────────────────────────────
def _dump(obj, path: str):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def write_outputs(result: SearchResult, out_dir: str) -> dict[str, str]:
    """episodes.csv, best_acc.json, best_sec.json and pareto.json under out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {name: os.path.join(out_dir, name)
             for name in (EPISODES_CSV, BEST_ACC_JSON, BEST_SEC_JSON, PARETO_JSON)}
    result.frame().to_csv(paths[EPISODES_CSV], index=False)
    _dump(result.best_acc.to_dict(), paths[BEST_ACC_JSON])
    _dump(result.best_sec.to_dict(), paths[BEST_SEC_JSON])
    _dump([{"design": r.design.to_dict(), "acc": r.acc, "sec_mec": r.sec_mec,
            "episode": r.episode} for r in result.pareto], paths[PARETO_JSON])
    log.info("%s results written to %s", result.method, out_dir)
    return paths
