"""Service-caching agent: actor/critic with target networks and episode replay.

The actor emits M*F sigmoid scores which are projected to a binary,
capacity-feasible cache matrix; the raw thresholded selection is kept for the
overflow penalty in the reward. Both networks see the recurrent encoding of
the small-slot state sequence with the raw final frame concatenated
alongside it, so the history augments rather than replaces the current
state. A plain variant (no LSTM, last small-slot state only) serves as the
DDPG baseline.
"""
from __future__ import annotations

import copy
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import nn
from .config import AgentParams, SystemConfig
from .env import ServiceCatalog, SmallState, switching_cost


def featurize(state: SmallState) -> np.ndarray:
    """Flatten one small-slot state {c, g, p} with scale normalization.

    g and p grow without bound within an episode; dividing by their running
    maximum keeps the network inputs in [-1, 1] while preserving ranking.
    """
    g = state.g / (1.0 + np.abs(state.g).max())
    p = state.p / (1.0 + state.p.max())
    return np.concatenate([state.c.ravel(), g, p.ravel()])


def seq_features(states: list[SmallState]) -> np.ndarray:
    return np.stack([featurize(s) for s in states])


def project_action(raw_scores: np.ndarray, catalog: ServiceCatalog,
                   cfg: SystemConfig) -> tuple[np.ndarray, np.ndarray]:
    """Threshold at 0.5, then greedily evict lowest-score services per ES
    until the cache capacity holds. Returns (feasible matrix, raw matrix)."""
    scores = raw_scores.reshape(cfg.M, cfg.F)
    c_raw = (scores >= 0.5).astype(float)
    c = c_raw.copy()
    for m in range(cfg.M):
        used = float(c[m] @ catalog.cache_sizes)
        if used <= cfg.C_m:
            continue
        order = np.lexsort((np.arange(cfg.F), scores[m]))  # score asc, index asc
        for f_idx in order:
            if used <= cfg.C_m:
                break
            if c[m, f_idx] > 0:
                c[m, f_idx] = 0.0
                used -= float(catalog.cache_sizes[f_idx])
    return c, c_raw


def overflow_penalty(c_raw: np.ndarray, catalog: ServiceCatalog,
                     cfg: SystemConfig) -> float:
    """Per-ES cache overflow of the raw selection, scaled to download seconds."""
    used = c_raw @ catalog.cache_sizes
    return float(np.maximum(used - cfg.C_m, 0.0).sum() / cfg.R_back)


def compute_reward(qos_sum: float, c_prev: np.ndarray, c_raw: np.ndarray,
                   c_new: np.ndarray, catalog: ServiceCatalog,
                   cfg: SystemConfig) -> float:
    """r = qos - switching cost - raw-selection overflow penalty."""
    cost = switching_cost(c_prev, c_new, catalog, cfg.R_back)
    return qos_sum - cost - overflow_penalty(c_raw, catalog, cfg)


@dataclass
class Transition:
    state_seq: np.ndarray  # (K, Din)
    action: np.ndarray     # (M*F,)
    reward: float
    next_seq: np.ndarray   # (K, Din)


class ReplayBuffer:
    """Strict FIFO ring of bounded capacity."""

    def __init__(self, capacity: int):
        self._buf: deque[Transition] = deque(maxlen=capacity)

    def push(self, t: Transition) -> None:
        self._buf.append(t)

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        idx = rng.integers(0, len(self._buf), batch_size)
        return [self._buf[i] for i in idx]

    def __len__(self) -> int:
        return len(self._buf)


class CachingAgent:
    """Actor/critic pair with target networks and soft updates."""

    def __init__(self, cfg: SystemConfig, params: AgentParams,
                 rng: np.random.Generator):
        self.cfg = cfg
        self.params = params
        din = cfg.M * cfg.F + cfg.F + cfg.M * cfg.F
        act_dim = cfg.M * cfg.F
        lstm = params.lstm_hidden if params.use_lstm else None
        skip = params.lstm_skip and params.use_lstm
        self.actor_spec = nn.NetSpec(din, params.hidden1, params.hidden2,
                                     lstm, act_dim, "sigmoid", skip=skip)
        self.critic_spec = nn.NetSpec(din, params.hidden1, params.hidden2,
                                      lstm, 1, "identity", aux_dim=act_dim,
                                      skip=skip)
        self.actor = nn.init_params(self.actor_spec, rng)
        self.critic = nn.init_params(self.critic_spec, rng)
        self.target_actor = copy.deepcopy(self.actor)
        self.target_critic = copy.deepcopy(self.critic)
        self.opt_actor = nn.Adam(self.actor, params.actor_lr)
        self.opt_critic = nn.Adam(self.critic, params.critic_lr)
        self.buffer = ReplayBuffer(params.buffer_capacity)
        self.noise_sigma = params.noise_sigma0

    def set_episode(self, episode: int) -> None:
        self.noise_sigma = max(
            self.params.noise_sigma0 * self.params.noise_decay ** episode,
            self.params.noise_floor)

    def scores(self, state_seq: np.ndarray, explore: bool,
               rng: np.random.Generator | None = None) -> np.ndarray:
        out, _ = nn.forward(self.actor_spec, self.actor, state_seq[None])
        scores = out[0]
        if explore:
            scores = scores + rng.normal(0.0, self.noise_sigma, scores.shape)
        return scores

    def act(self, state_seq: np.ndarray, explore: bool,
            rng: np.random.Generator | None, catalog: ServiceCatalog):
        """Returns (feasible cache matrix, raw thresholded matrix)."""
        s = self.scores(state_seq, explore, rng)
        return project_action(s, catalog, self.cfg)

    def train_step(self, rng: np.random.Generator) -> dict:
        batch = self.buffer.sample(self.params.batch_size, rng)
        B = len(batch)
        s = np.stack([t.state_seq for t in batch])
        a = np.stack([t.action for t in batch])
        r = np.array([t.reward for t in batch])
        s2 = np.stack([t.next_seq for t in batch])
        gamma = self.params.gamma

        a2, _ = nn.forward(self.actor_spec, self.target_actor, s2)
        q2, _ = nn.forward(self.critic_spec, self.target_critic, s2, a2)
        y = r + gamma * q2[:, 0]

        q, ccache = nn.forward(self.critic_spec, self.critic, s, a)
        err = q[:, 0] - y
        critic_loss = float(np.mean(err ** 2))
        if not np.isfinite(critic_loss):
            raise FloatingPointError("critic loss diverged")
        dq = (2.0 * err / B)[:, None]
        cgrads, _, _ = nn.backward(self.critic_spec, self.critic, ccache, dq)
        self.opt_critic.step(self.critic, cgrads)

        mu, acache = nn.forward(self.actor_spec, self.actor, s)
        qa, qcache = nn.forward(self.critic_spec, self.critic, s, mu)
        _, _, dmu = nn.backward(self.critic_spec, self.critic, qcache,
                                np.full_like(qa, 1.0 / B))
        agrads, _, _ = nn.backward(self.actor_spec, self.actor, acache, -dmu)
        self.opt_actor.step(self.actor, agrads)

        nn.soft_update(self.target_actor, self.actor, self.params.zeta)
        nn.soft_update(self.target_critic, self.critic, self.params.zeta)
        return {"critic_loss": critic_loss, "actor_q": float(np.mean(qa))}

    def save(self, path: str) -> None:
        groups = {
            "actor": self.actor, "critic": self.critic,
            "target_actor": self.target_actor, "target_critic": self.target_critic,
            "opt_actor": self.opt_actor.state(), "opt_critic": self.opt_critic.state(),
        }
        nn.save_checkpoint(path, groups, {"noise_sigma": self.noise_sigma})

    def load(self, path: str) -> None:
        groups, meta = nn.load_checkpoint(path)
        self.actor = groups["actor"]
        self.critic = groups["critic"]
        self.target_actor = groups["target_actor"]
        self.target_critic = groups["target_critic"]
        self.opt_actor = nn.Adam(self.actor, self.params.actor_lr)
        self.opt_actor.load_state(groups["opt_actor"])
        self.opt_critic = nn.Adam(self.critic, self.params.critic_lr)
        self.opt_critic.load_state(groups["opt_critic"])
        self.noise_sigma = float(meta["noise_sigma"])
