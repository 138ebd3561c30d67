"""MEC system model: topology, tasks, channel, delay/energy/QoS, caching state.

All evaluation routines are pure functions over explicit state and accept a
leading population axis on the decision arrays so a whole GA population can
be scored in one vectorized call.

Offload target encoding: 0 = local, 1..M = edge server index + 1, M+1 = cloud.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig

LOCAL = 0


def cloud_target(M: int) -> int:
    return M + 1


class StructuralInfeasibility(ValueError):
    """A decision violates one of the structural constraints (ids 17a-17f)."""

    def __init__(self, constraint: str, message: str):
        super().__init__(f"[{constraint}] {message}")
        self.constraint = constraint


@dataclass(frozen=True)
class Task:
    type: int
    input_bits: float
    comp_cycles: float


@dataclass(frozen=True)
class ServiceCatalog:
    cache_sizes: np.ndarray   # (F,) bits
    densities: np.ndarray     # (F,) cycles/bit
    input_min: np.ndarray     # (F,) bits
    input_max: np.ndarray     # (F,) bits

    @property
    def F(self) -> int:
        return len(self.cache_sizes)

    @classmethod
    def generate(cls, cfg: SystemConfig, rng: np.random.Generator) -> "ServiceCatalog":
        sizes = rng.uniform(cfg.cache_size_min, cfg.cache_size_max, cfg.F)
        densities = rng.uniform(cfg.density_min, cfg.density_max, cfg.F)
        lo = np.full(cfg.F, cfg.input_min)
        hi = np.full(cfg.F, cfg.input_max)
        return cls(sizes, densities, lo, hi)


@dataclass(frozen=True)
class Topology:
    td_pos: np.ndarray   # (N, 2) m
    es_pos: np.ndarray   # (M, 2) m
    assoc: np.ndarray    # (N,) index of associated ES
    dist: np.ndarray     # (N, M) m

    @classmethod
    def generate(cls, cfg: SystemConfig, rng: np.random.Generator) -> "Topology":
        side = cfg.area_side
        g = int(np.ceil(np.sqrt(cfg.M)))
        cells = [((i + 0.5) * side / g, (j + 0.5) * side / g)
                 for j in range(g) for i in range(g)]
        es_pos = np.array(cells[: cfg.M])
        td_pos = rng.uniform(0.0, side, (cfg.N, 2))
        dist = np.linalg.norm(td_pos[:, None, :] - es_pos[None, :, :], axis=2)
        dist = np.maximum(dist, 1.0)  # clamp to 1 m so the path loss stays bounded
        assoc = np.argmin(dist, axis=1)
        return cls(td_pos, es_pos, assoc, dist)


@dataclass(frozen=True)
class TaskBatch:
    types: np.ndarray       # (N,) int
    input_bits: np.ndarray  # (N,)
    comp_cycles: np.ndarray  # (N,)

    @classmethod
    def from_tasks(cls, tasks: list[Task]) -> "TaskBatch":
        return cls(
            np.array([t.type for t in tasks], dtype=np.int64),
            np.array([t.input_bits for t in tasks]),
            np.array([t.comp_cycles for t in tasks]),
        )

    def __len__(self) -> int:
        return len(self.types)


@dataclass
class OffRaDecision:
    targets: np.ndarray  # (N,) int in {0..M+1}
    f: np.ndarray        # (N,) compute fraction of the target ES
    b: np.ndarray        # (N,) bandwidth fraction of the associated ES


@dataclass
class SlotOutcome:
    delay: np.ndarray       # (N,) s
    energy: np.ndarray      # (N,) J
    qos: np.ndarray         # (N,)
    ok_energy: np.ndarray   # (N,) bool, constraint 17g
    ok_delay: np.ndarray    # (N,) bool, constraint 17h


@dataclass
class SmallState:
    c: np.ndarray  # (M, F) current cache matrix
    g: np.ndarray  # (F,) cumulative cache-gain per service
    p: np.ndarray  # (M, F) cumulative offload popularity

    @classmethod
    def zeros(cls, cfg: SystemConfig) -> "SmallState":
        return cls(np.zeros((cfg.M, cfg.F)), np.zeros(cfg.F), np.zeros((cfg.M, cfg.F)))

    def copy(self) -> "SmallState":
        return SmallState(self.c.copy(), self.g.copy(), self.p.copy())


def zipf_pmf(F: int, s: float) -> np.ndarray:
    ranks = np.arange(1, F + 1, dtype=float)
    w = ranks ** (-s)
    return w / w.sum()


def sample_task_batch(catalog: ServiceCatalog, cfg: SystemConfig,
                      rng: np.random.Generator) -> TaskBatch:
    pmf = zipf_pmf(catalog.F, cfg.zipf_s)
    types = rng.choice(catalog.F, size=cfg.N, p=pmf)
    inputs = rng.uniform(catalog.input_min[types], catalog.input_max[types])
    comp = inputs * catalog.densities[types]
    return TaskBatch(types, inputs, comp)


def generate_tasks(catalog: ServiceCatalog, cfg: SystemConfig,
                   rng: np.random.Generator) -> list[Task]:
    batch = sample_task_batch(catalog, cfg, rng)
    return [Task(int(t), float(s), float(c))
            for t, s, c in zip(batch.types, batch.input_bits, batch.comp_cycles)]


def channel_gain(dis, alpha_pl: float, rng: np.random.Generator):
    """Rayleigh power fading times path loss: Exp(1) * dis^-alpha."""
    dis = np.asarray(dis, dtype=float)
    if np.any(dis <= 0):
        raise ValueError("distance must be > 0")
    return rng.exponential(1.0, size=dis.shape if dis.shape else None) * dis ** (-alpha_pl)


def sample_gains(topo: Topology, cfg: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    """Per-TD channel gain to its associated ES, redrawn each small slot."""
    dis = topo.dist[np.arange(len(topo.assoc)), topo.assoc]
    return channel_gain(dis, cfg.alpha_pl, rng)


def uplink_rate(b_frac, W_m, p_n, h, sigma2):
    """Shannon uplink rate in bits/s; zero bandwidth gives zero rate."""
    return np.asarray(b_frac) * W_m * np.log2(1.0 + p_n * np.asarray(h) / sigma2)


def evaluate(batch: TaskBatch, targets, f, b, gains, topo: Topology,
             cfg: SystemConfig, rate_full=None):
    """Delay/energy/QoS for decisions with an optional leading population axis.

    targets/f/b: (..., N). Returns (T, E, Q) of the same shape. Zero fractions
    on routes that need them produce infinite delay (and deeply negative QoS),
    which the GA's piecewise fitness maps to the violation floor.
    """
    targets = np.asarray(targets)
    f = np.asarray(f, dtype=float)
    b = np.asarray(b, dtype=float)
    M = cfg.M
    cloud = M + 1

    if rate_full is None:
        rate_full = cfg.W_m * np.log2(1.0 + cfg.p_n * gains / cfg.sigma2)  # (N,)
    t_local = batch.comp_cycles / cfg.F_l
    e_local = cfg.epsilon * cfg.F_l ** 2 * batch.comp_cycles

    is_local = targets == LOCAL
    is_cloud = targets == cloud
    is_es = ~is_local & ~is_cloud
    is_coop = is_es & (targets != topo.assoc + 1)

    with np.errstate(divide="ignore", invalid="ignore"):
        t_up = batch.input_bits / (b * rate_full)
        t_comp_es = batch.comp_cycles / (f * cfg.F_m)
    t_up = np.where(is_local, 0.0, t_up)

    t_cloud_tail = batch.input_bits / cfg.R_back + batch.comp_cycles / cfg.F_c
    t_coop_hop = np.where(is_coop, batch.input_bits / cfg.R_co, 0.0)

    T = np.where(
        is_local, t_local,
        t_up + np.where(is_cloud, t_cloud_tail, t_coop_hop + t_comp_es),
    )
    E = np.where(is_local, e_local, cfg.p_n * t_up)
    Q = (cfg.alpha_w * (cfg.T_th - T) / cfg.T_th
         + cfg.beta_w * (cfg.E_th - E) / cfg.E_th)
    return T, E, Q


def local_qos(batch: TaskBatch, cfg: SystemConfig) -> np.ndarray:
    t = batch.comp_cycles / cfg.F_l
    e = cfg.epsilon * cfg.F_l ** 2 * batch.comp_cycles
    return (cfg.alpha_w * (cfg.T_th - t) / cfg.T_th
            + cfg.beta_w * (cfg.E_th - e) / cfg.E_th)


def check_feasibility(cache: np.ndarray, offra: OffRaDecision, batch: TaskBatch,
                      topo: Topology, catalog: ServiceCatalog, cfg: SystemConfig,
                      outcome: SlotOutcome | None = None) -> list[str]:
    """Violated constraint ids among 17a-17f (17g/17h too when an outcome is given)."""
    violated = []
    M = cfg.M
    t = offra.targets
    is_local = t == LOCAL
    is_cloud = t == M + 1
    is_es = ~is_local & ~is_cloud

    es_idx = np.where(is_es, t - 1, 0)
    cached = cache[es_idx, batch.types] > 0
    if np.any(is_es & (~cached | (offra.f <= 0))):
        violated.append("17a")
    if np.any(is_local & (offra.b > 0)):
        violated.append("17b")
    if np.any((t < 0) | (t > M + 1)):
        violated.append("17c")
    if np.any(cache @ catalog.cache_sizes > cfg.C_m * (1 + 1e-12)):
        violated.append("17d")
    f_sums = np.bincount(es_idx[is_es], weights=offra.f[is_es], minlength=M)
    if np.any(f_sums > 1.0 + 1e-9):
        violated.append("17e")
    offload = ~is_local
    b_sums = np.bincount(topo.assoc[offload], weights=offra.b[offload], minlength=M)
    if np.any(b_sums > 1.0 + 1e-9):
        violated.append("17f")
    if outcome is not None:
        if np.any(~outcome.ok_energy):
            violated.append("17g")
        if np.any(~outcome.ok_delay):
            violated.append("17h")
    return violated


def evaluate_slot(tasks, cache: np.ndarray, offra: OffRaDecision, gains,
                  topo: Topology, cfg: SystemConfig,
                  catalog: ServiceCatalog | None = None) -> SlotOutcome:
    """Score one executed slot; rejects structurally infeasible decisions."""
    batch = tasks if isinstance(tasks, TaskBatch) else TaskBatch.from_tasks(tasks)
    if catalog is not None:
        bad = [v for v in check_feasibility(cache, offra, batch, topo, catalog, cfg)
               if v in ("17a", "17b", "17c", "17e", "17f")]
        if bad:
            raise StructuralInfeasibility(bad[0], "decision fails structural check")
    T, E, Q = evaluate(batch, offra.targets, offra.f, offra.b, gains, topo, cfg)
    return SlotOutcome(T, E, Q, E <= cfg.E_th, T <= cfg.T_th)


def switching_cost(c_prev: np.ndarray, c_new: np.ndarray,
                   catalog: ServiceCatalog, R_back: float) -> float:
    """Download time for newly cached services; evictions are free."""
    added = (c_new > 0) & (c_prev <= 0)
    return float((added * catalog.cache_sizes).sum() / R_back)


def update_small_state(prev: SmallState, tasks, offra: OffRaDecision,
                       outcome: SlotOutcome, cache: np.ndarray,
                       cfg: SystemConfig) -> SmallState:
    """Accumulate cache gain and popularity counters after one small slot."""
    batch = tasks if isinstance(tasks, TaskBatch) else TaskBatch.from_tasks(tasks)
    state = prev.copy()
    state.c = cache.copy()
    q_gain = outcome.qos - local_qos(batch, cfg)
    state.g += np.bincount(batch.types, weights=q_gain, minlength=cfg.F)
    is_es = (offra.targets != LOCAL) & (offra.targets != cfg.M + 1)
    if np.any(is_es):
        np.add.at(state.p, (offra.targets[is_es] - 1, batch.types[is_es]), 1.0)
    return state


@dataclass
class SlotContext:
    """Everything the Off-RA solvers need to score one small slot."""

    batch: TaskBatch
    gains: np.ndarray
    cache: np.ndarray
    topo: Topology
    catalog: ServiceCatalog
    cfg: SystemConfig

    @property
    def rate_full(self) -> np.ndarray:
        """Full-bandwidth uplink rate per TD; cached, it never changes in-slot."""
        r = getattr(self, "_rate_full", None)
        if r is None:
            cfg = self.cfg
            r = cfg.W_m * np.log2(1.0 + cfg.p_n * self.gains / cfg.sigma2)
            object.__setattr__(self, "_rate_full", r)
        return r
