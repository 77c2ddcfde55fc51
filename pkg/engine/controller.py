"""
controller.py - LSTM policy that proposes (template, provider) per node.

One LSTM cell is unrolled over the decision sequence

    node 1 arch, node 1 provider, node 2 arch, ..., node N provider

(arch-only runs drop the provider steps). Each step reads the embedding of
the previous choice, a zero vector at step 0, and emits logits from the
head of its decision kind. Heads start at zero, so a fresh policy is
uniform.

Training is REINFORCE: ascend R * sum_t log pi(a_t). Gradients are derived
by hand through the softmax heads and the LSTM (backprop through time),
clipped to a global norm and applied with RMSProp.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from settings import (
    CONTROLLER_EMBED, CONTROLLER_HIDDEN, CONTROLLER_INIT_SCALE, CONTROLLER_LR,
    GRAD_CLIP_NORM, N_TEMPLATES, RMSPROP_DECAY, RMSPROP_EPS,
)
from utils.helpers import global_norm, softmax

log = logging.getLogger("splitq.search")

ARCH = "arch"
PROVIDER = "provider"


class UpdateError(RuntimeError):
    """Policy gradient is not finite; the step was not applied."""


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass(frozen=True)
class Trajectory:
    actions: tuple[int, ...]
    log_probs: tuple[float, ...]

    @property
    def log_prob(self) -> float:
        return float(sum(self.log_probs))

    def __len__(self):
        return len(self.actions)


class Controller:
    """Single-layer LSTM with one softmax head per decision kind."""

    def __init__(self, n_nodes: int, n_providers: int, arch_only: bool = False,
                 hidden: int = CONTROLLER_HIDDEN, embed: int = CONTROLLER_EMBED,
                 lr: float = CONTROLLER_LR, decay: float = RMSPROP_DECAY,
                 clip: float = GRAD_CLIP_NORM, seed: int = 0):
        if n_nodes < 1 or n_providers < 1:
            raise ValueError("controller needs at least one node and one provider")
        self.n_nodes = n_nodes
        self.n_providers = n_providers
        self.arch_only = arch_only
        self.hidden = hidden
        self.embed = embed
        self.lr = lr
        self.decay = decay
        self.clip = clip

        rng = np.random.default_rng(seed)
        s = CONTROLLER_INIT_SCALE
        H, E = hidden, embed
        self.params = {
            "W": rng.uniform(-s, s, (4 * H, E)),
            "U": rng.uniform(-s, s, (4 * H, H)),
            "b": rng.uniform(-s, s, 4 * H),
            "E_arch": rng.uniform(-s, s, (N_TEMPLATES, E)),
            "E_provider": rng.uniform(-s, s, (n_providers, E)),
            "W_arch": np.zeros((N_TEMPLATES, H)),
            "b_arch": np.zeros(N_TEMPLATES),
            "W_provider": np.zeros((n_providers, H)),
            "b_provider": np.zeros(n_providers),
        }
        self._ms = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.updates = 0
        self.skipped = 0

    # ── Sequence layout ──

    @property
    def kinds(self) -> list[str]:
        per_node = [ARCH] if self.arch_only else [ARCH, PROVIDER]
        return per_node * self.n_nodes

    @property
    def design_space_size(self) -> int:
        per_node = N_TEMPLATES if self.arch_only else N_TEMPLATES * self.n_providers
        return per_node ** self.n_nodes

    def _width(self, kind: str) -> int:
        return N_TEMPLATES if kind == ARCH else self.n_providers

    # ── Forward ──

    def _cell(self, x, h, c):
        H = self.hidden
        p = self.params
        z = p["W"] @ x + p["U"] @ h + p["b"]
        i = _sigmoid(z[:H])
        f = _sigmoid(z[H:2 * H])
        o = _sigmoid(z[2 * H:3 * H])
        g = np.tanh(z[3 * H:])
        c_new = f * c + i * g
        h_new = o * np.tanh(c_new)
        return h_new, c_new, (i, f, o, g)

    def _input(self, t: int, actions) -> np.ndarray:
        if t == 0:
            return np.zeros(self.embed)
        prev_kind = self.kinds[t - 1]
        table = self.params["E_arch"] if prev_kind == ARCH else self.params["E_provider"]
        return table[actions[t - 1]]

    def _logits(self, kind: str, h: np.ndarray) -> np.ndarray:
        p = self.params
        if kind == ARCH:
            return p["W_arch"] @ h + p["b_arch"]
        return p["W_provider"] @ h + p["b_provider"]

    def _unroll(self, actions=None, rng=None):
        """Teacher-forced when `actions` is given, sampled from `rng` otherwise."""
        h = np.zeros(self.hidden)
        c = np.zeros(self.hidden)
        chosen, cache = [], []
        for t, kind in enumerate(self.kinds):
            x = self._input(t, chosen)
            h_prev, c_prev = h, c
            h, c, gates = self._cell(x, h, c)
            probs = softmax(self._logits(kind, h))
            if actions is None:
                a = int(rng.choice(probs.size, p=probs))
            else:
                a = int(actions[t])
                if not 0 <= a < probs.size:
                    raise ValueError(f"step {t} ({kind}) action {a} outside 0..{probs.size - 1}")
            chosen.append(a)
            cache.append((x, h_prev, c_prev, gates, c, h, probs))
        return chosen, cache

    def sample(self, rng: np.random.Generator) -> Trajectory:
        actions, cache = self._unroll(rng=rng)
        logps = tuple(float(np.log(step[-1][a])) for a, step in zip(actions, cache))
        return Trajectory(tuple(actions), logps)

    def probabilities(self, actions) -> list[np.ndarray]:
        """Per-step distributions along a given decision prefix."""
        _, cache = self._unroll(actions=list(actions))
        return [step[-1] for step in cache]

    def trajectory_log_prob(self, actions) -> float:
        actions = list(actions)
        probs = self.probabilities(actions)
        return float(sum(np.log(p[a]) for p, a in zip(probs, actions)))

    # ── Backward ──

    def grad_log_prob(self, actions) -> tuple[float, dict]:
        """sum_t log pi(a_t) and its gradient for every parameter."""
        actions = list(actions)
        _, cache = self._unroll(actions=actions)
        p = self.params
        H = self.hidden
        grads = {k: np.zeros_like(v) for k, v in p.items()}
        kinds = self.kinds

        total = 0.0
        dh_out = []
        for t, (a, step) in enumerate(zip(actions, cache)):
            h, probs = step[5], step[6]
            total += float(np.log(probs[a]))
            dlogits = -probs.copy()
            dlogits[a] += 1.0
            head = "arch" if kinds[t] == ARCH else "provider"
            grads[f"W_{head}"] += np.outer(dlogits, h)
            grads[f"b_{head}"] += dlogits
            dh_out.append(p[f"W_{head}"].T @ dlogits)

        dh_next = np.zeros(H)
        dc_next = np.zeros(H)
        for t in reversed(range(len(actions))):
            x, h_prev, c_prev, (i, f, o, g), c, _, _ = cache[t]
            dh = dh_out[t] + dh_next
            tc = np.tanh(c)
            do = dh * tc
            dc = dh * o * (1.0 - tc * tc) + dc_next
            di, dg, df = dc * g, dc * i, dc * c_prev
            dc_next = dc * f
            dz = np.concatenate([di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g * g)])
            grads["W"] += np.outer(dz, x)
            grads["U"] += np.outer(dz, h_prev)
            grads["b"] += dz
            dh_next = p["U"].T @ dz
            if t > 0:
                table = "E_arch" if kinds[t - 1] == ARCH else "E_provider"
                grads[table][actions[t - 1]] += p["W"].T @ dz
        return total, grads

    def update(self, actions, reward: float) -> float:
        """One RMSProp ascent step on reward * log pi(actions).

        Returns the pre-clip gradient norm.

        Raises:
            UpdateError: non-finite gradient; parameters are left as they were.
        """
        _, grads = self.grad_log_prob(actions)
        grads = {k: reward * v for k, v in grads.items()}
        norm = global_norm(grads.values())
        if not np.isfinite(norm):
            self.skipped += 1
            log.warning("controller update skipped: gradient norm %s", norm)
            raise UpdateError(f"non-finite policy gradient (reward {reward})")
        if norm > self.clip:
            scale = self.clip / norm
            grads = {k: v * scale for k, v in grads.items()}
        for k, g in grads.items():
            self._ms[k] = self.decay * self._ms[k] + (1.0 - self.decay) * g * g
            self.params[k] += self.lr * g / (np.sqrt(self._ms[k]) + RMSPROP_EPS)
        self.updates += 1
        return norm
