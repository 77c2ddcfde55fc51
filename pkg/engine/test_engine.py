"""
test_engine.py - Controller gradients, reward bookkeeping and the searches.

Uso:
    pytest engine
"""

import json

import numpy as np
import pandas as pd
import pytest

from engine.controller import ARCH, PROVIDER, Controller, UpdateError
from engine.design_env import DesignSpaceEnv, QuantumEvaluator, TabularEvaluator
from engine.search import (
    CSV_COLUMNS, SearchConfig, pareto_front, reward, run_random_search, run_search,
    run_single_provider_nas, update_baseline, write_outputs,
)
from model.design import Model
from model.trainer import TrainConfig
from utils.timer import EpisodeTimer

PROVIDERS = ["qcp1", "qcp2", "qcp3"]


# ── Controller ──

def test_fresh_policy_is_uniform():
    ctrl = Controller(7, 3, seed=1)
    rng = np.random.default_rng(0)
    traj = ctrl.sample(rng)
    for kind, probs in zip(ctrl.kinds, ctrl.probabilities(traj.actions)):
        expected = 1 / 6 if kind == ARCH else 1 / 3
        assert np.all(np.abs(probs - expected) < 1e-9)


def test_design_space_sizes():
    assert Controller(7, 3).design_space_size == 18 ** 7
    assert Controller(7, 3, arch_only=True).design_space_size == 6 ** 7


def test_trajectory_shape_and_determinism():
    ctrl = Controller(7, 3, seed=4)
    a = ctrl.sample(np.random.default_rng(9))
    b = ctrl.sample(np.random.default_rng(9))
    assert a == b
    assert len(a) == 14
    for kind, act in zip(ctrl.kinds, a.actions):
        assert 0 <= act < (6 if kind == ARCH else 3)
    assert ctrl.kinds[:2] == [ARCH, PROVIDER]
    assert a.log_prob == pytest.approx(ctrl.trajectory_log_prob(a.actions), abs=1e-12)


def test_policy_gradient_matches_finite_differences():
    ctrl = Controller(1, 3, seed=2)
    rng = np.random.default_rng(3)
    for k in ("W_arch", "b_arch", "W_provider", "b_provider"):
        ctrl.params[k][...] = rng.uniform(-0.5, 0.5, ctrl.params[k].shape)
    actions = [4, 2]
    _, grads = ctrl.grad_log_prob(actions)
    h = 1e-6
    for name, value in ctrl.params.items():
        fd = np.zeros_like(value)
        for idx in np.ndindex(value.shape):
            old = value[idx]
            value[idx] = old + h
            up = ctrl.trajectory_log_prob(actions)
            value[idx] = old - h
            down = ctrl.trajectory_log_prob(actions)
            value[idx] = old
            fd[idx] = (up - down) / (2 * h)
        scale = max(np.max(np.abs(fd)), 1e-6)
        assert np.max(np.abs(grads[name] - fd)) / scale < 1e-3, name


def test_positive_reward_raises_trajectory_probability():
    ctrl = Controller(7, 3, lr=0.01, seed=5)
    actions = list(ctrl.sample(np.random.default_rng(1)).actions)
    previous = ctrl.trajectory_log_prob(actions)
    for _ in range(20):
        ctrl.update(actions, 1.0)
        current = ctrl.trajectory_log_prob(actions)
        assert current > previous
        previous = current
    for probs in ctrl.probabilities(actions):
        assert abs(probs.sum() - 1.0) < 1e-9


def test_non_finite_gradient_skips_the_step():
    ctrl = Controller(3, 3, seed=0)
    before = {k: v.copy() for k, v in ctrl.params.items()}
    with pytest.raises(UpdateError):
        ctrl.update([1, 0, 2, 1, 3, 2], float("nan"))
    assert all(np.array_equal(before[k], ctrl.params[k]) for k in before)
    assert ctrl.skipped == 1 and ctrl.updates == 0


def test_rmsprop_defaults():
    ctrl = Controller(7, 3)
    assert ctrl.decay == 0.9 and ctrl.lr == 0.99 and ctrl.clip == 5.0 and ctrl.hidden == 35


# ── Reward and baseline ──

def test_reward_examples():
    assert reward([(0.7633, 0.6245)], 0.70, 1.0) == pytest.approx(0.6878, abs=1e-6)
    assert reward([(0.8, 0.0)], 0.8, 1.0) == 0.0
    full = reward([(0.6, 0.4)], 0.5, 1.0) - 0.1
    half = reward([(0.6, 0.4)], 0.5, 0.5) - 0.1
    assert half == pytest.approx(full / 2)
    assert reward([(0.6, 0.2), (0.8, 0.4)], 0.5, 1.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        reward([], 0.5, 1.0)


def test_baseline_examples():
    assert update_baseline(0.9, 0.8, 0.95) == pytest.approx(0.895)
    assert update_baseline(None, 0.42) == 0.42
    assert update_baseline(0.3, 0.7, 0.0) == 0.7
    b = 0.0
    for _ in range(200):
        b = update_baseline(b, 0.65, 0.95)
    assert abs(b - 0.65) < 1e-3


# ── Design environment ──

def test_env_decodes_interleaved_actions():
    env = DesignSpaceEnv(TabularEvaluator(7, 3), PROVIDERS)
    design = env.decode([1, 0, 2, 1, 3, 2, 4, 0, 5, 1, 0, 2, 1, 0])
    assert design.arch == {1: 1, 2: 2, 3: 3, 4: 4, 5: 5, 6: 0, 7: 1}
    assert design.provider[3] == "qcp3" and design.provider[5] == "qcp2"
    assert list(env.action_space.nvec) == [6, 3] * 7


def test_env_rejects_bad_settings():
    with pytest.raises(ValueError):
        DesignSpaceEnv(TabularEvaluator(7, 3), PROVIDERS, lam=0.0)
    with pytest.raises(ValueError):
        DesignSpaceEnv(TabularEvaluator(7, 3), PROVIDERS, pinned_provider="qcp9")


def test_uniform_marginals():
    env = DesignSpaceEnv(TabularEvaluator(7, 3), PROVIDERS)
    env.reset(seed=17)
    samples = np.array([env.action_space.sample() for _ in range(10_000)])
    arch, prov = samples[:, 0::2], samples[:, 1::2]
    for values, k, sigmas in ((arch.ravel(), 6, 3), (prov.ravel(), 3, 3)):
        n = values.size
        counts = np.bincount(values, minlength=k)
        sd = np.sqrt(n * (1 / k) * (1 - 1 / k))
        assert np.all(np.abs(counts - n / k) < sigmas * sd)
    for col, k in [(arch[:, j], 6) for j in range(7)] + [(prov[:, j], 3) for j in range(7)]:
        counts = np.bincount(col, minlength=k)
        sd = np.sqrt(col.size * (1 / k) * (1 - 1 / k))
        assert np.all(np.abs(counts - col.size / k) < 4 * sd)


# ── Searches ──

def _tabular(seed):
    return TabularEvaluator(7, 3, seed=seed)


def test_controller_beats_random_on_tabular_objective():
    wins = 0
    for seed in range(10):
        cfg = SearchConfig(episodes=200, depth=2, lam=0.1, controller_lr=0.1, seed=seed)
        engine = run_search(cfg, TabularEvaluator(3, 3, seed=seed), PROVIDERS)
        random = run_random_search(cfg, TabularEvaluator(3, 3, seed=seed), PROVIDERS)
        wins += engine.best_score >= random.best_score
    assert wins >= 8


@pytest.mark.parametrize("samples", [1, 3])
def test_reward_bookkeeping(samples):
    cfg = SearchConfig(episodes=30, samples_per_episode=samples, lam=0.5, controller_lr=0.05, seed=2)
    result = run_search(cfg, _tabular(2), PROVIDERS)
    assert len(result.records) == 30 * samples
    accs = [r.acc for r in result.records]
    for r in result.records:
        assert r.reward == r.acc - r.baseline + cfg.lam * r.sec_mec
        assert min(accs) - 1e-12 <= r.baseline <= max(accs) + 1e-12
    first = [r for r in result.records if r.episode == 0]
    assert first[0].baseline == pytest.approx(np.mean([r.acc for r in first]))


def test_episode_timer():
    timer = EpisodeTimer()
    with pytest.raises(RuntimeError):
        timer.complete_episode()
    for _ in range(3):
        timer.start()
        assert timer.complete_episode() >= 0.0
    assert len(timer.episode_times) == 3
    assert timer.total == pytest.approx(sum(timer.episode_times))
    assert EpisodeTimer.format_time(3725.5) == "01:02:05.5"
    with pytest.raises(RuntimeError):
        timer.complete_episode()


def test_search_records_one_time_per_episode():
    result = run_search(SearchConfig(episodes=5, seed=0), _tabular(0), PROVIDERS)
    assert len(result.episode_seconds) == 5
    assert all(t >= 0.0 for t in result.episode_seconds)


def test_random_search_is_seeded():
    cfg = SearchConfig(episodes=15, seed=4)
    a = run_random_search(cfg, _tabular(0), PROVIDERS)
    b = run_random_search(cfg, _tabular(0), PROVIDERS)
    assert [r.design for r in a.records] == [r.design for r in b.records]


def test_single_provider_nas_has_no_security():
    cfg = SearchConfig(episodes=20, seed=1)
    result = run_single_provider_nas(cfg, _tabular(1), PROVIDERS, "qcp2")
    assert all(r.sec_mec == 0.0 for r in result.records)
    assert all(set(r.design.provider.values()) == {"qcp2"} for r in result.records)
    assert all(r.n_providers <= 1 for r in result.records)


def test_pareto_front_is_non_dominated():
    cfg = SearchConfig(episodes=60, seed=3)
    result = run_random_search(cfg, _tabular(3), PROVIDERS)
    front = pareto_front(result.records)
    assert front
    for f in front:
        assert not any(r.acc > f.acc and r.sec_mec > f.sec_mec for r in result.records)
    assert result.best_acc.acc == max(r.acc for r in result.records)
    assert result.best_acc in front


def test_outputs_are_reproducible(tmp_path):
    cfg = SearchConfig(episodes=10, controller_lr=0.05, seed=7)
    first = write_outputs(run_search(cfg, _tabular(7), PROVIDERS), str(tmp_path / "a"))
    second = write_outputs(run_search(cfg, _tabular(7), PROVIDERS), str(tmp_path / "b"))
    for name, path in first.items():
        with open(path, "rb") as f1, open(second[name], "rb") as f2:
            assert f1.read() == f2.read(), name
    df = pd.read_csv(first["episodes.csv"])
    assert list(df.columns) == CSV_COLUMNS and len(df) == 10


def test_quantum_pipeline_smoke(synth2, loopback_fleet, tmp_path):
    train_set, test_set = synth2
    evaluator = QuantumEvaluator(train_set, test_set.head(30), loopback_fleet,
                                 TrainConfig(epochs=1, train_samples=32), shots=200, workers=2)
    cfg = SearchConfig(episodes=2, depth=2, controller_lr=0.05, seed=0)
    result = run_search(cfg, evaluator, loopback_fleet.providers)
    assert len(result.records) == 2
    for r in result.records:
        assert 0.0 <= r.acc <= 1.0
        if r.n_nodes:
            assert r.model is not None
    paths = write_outputs(result, str(tmp_path))
    with open(paths["best_acc.json"]) as f:
        saved = json.load(f)
    if "params" in saved:
        assert Model.from_dict(saved).nodes == result.best_acc.model.nodes
