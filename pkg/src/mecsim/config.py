"""System configuration and experiment specs.

Unit conventions used everywhere: 1 KB = 8000 bits, 1 GB = 8e9 bits,
rates in bits/s, powers in W, compute in cycles/s.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

KB = 8_000.0  # bits
GB = 8e9  # bits
MHZ = 1e6
GHZ = 1e9
MBPS = 1e6


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


@dataclass
class SystemConfig:
    """Static system parameters (defaults follow the simulation setup)."""

    M: int = 2                      # edge servers
    N: int = 20                     # terminal devices
    F: int = 10                     # service types
    W_m: float = 20 * MHZ           # bandwidth per ES (Hz)
    F_m: float = 20 * GHZ           # compute per ES (cycles/s)
    C_m: float = 50 * GB            # cache capacity per ES (bits)
    F_c: float = 5 * GHZ            # cloud compute per task (cycles/s)
    F_l: float = 1 * GHZ            # TD compute (cycles/s)
    p_n: float = dbm_to_watt(20.0)  # TD transmit power (W)
    epsilon: float = 5e-27          # TD energy coefficient
    sigma2: float = dbm_to_watt(-114.0)  # noise power (W)
    alpha_pl: float = 2.0           # path loss exponent
    R_back: float = 200 * MBPS      # ES <-> cloud rate (bits/s)
    R_co: float = 20 * MBPS         # ES <-> ES rate (bits/s)
    alpha_w: float = 0.5            # QoS delay weight
    beta_w: float = 0.5             # QoS energy weight
    delta: float = 0.001            # switching-cost balance factor
    # calibrated so the largest task stays feasible when computed locally;
    # with a tighter budget one infeasible device collapses whole GA
    # populations onto the constant penalty fitness and selection stalls
    T_th: float = 40.0              # per-TD delay threshold (s)
    E_th: float = 200.0             # per-TD energy threshold (J)
    zipf_s: float = 0.8             # task popularity exponent
    I: int = 20                     # large slots per episode
    K: int = 5                      # small slots per large slot
    area_side: float = 500.0        # deployment square side (m)
    # service catalog ranges
    cache_size_min: float = 2 * GB
    cache_size_max: float = 20 * GB
    density_min: float = 400.0      # cycles/bit
    density_max: float = 1000.0
    input_min: float = 500 * KB     # bits
    input_max: float = 5000 * KB

    def validate(self) -> None:
        positive = [
            "W_m", "F_m", "C_m", "F_c", "F_l", "p_n", "sigma2", "R_back",
            "R_co", "T_th", "E_th", "area_side", "zipf_s",
        ]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if abs(self.alpha_w + self.beta_w - 1.0) > 1e-12:
            raise ValueError("alpha_w + beta_w must equal 1")
        for name in ("M", "N", "F", "I", "K"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def replace(self, **overrides) -> "SystemConfig":
        for name in overrides:
            if name not in {f.name for f in dataclasses.fields(self)}:
                raise KeyError(f"unknown SystemConfig field: {name}")
        cfg = dataclasses.replace(self, **overrides)
        cfg.validate()
        return cfg

    @classmethod
    def from_dict(cls, d: dict) -> "SystemConfig":
        cfg = cls().replace(**d)
        return cfg


@dataclass
class GaParams:
    pop_size: int = 30
    generations: int = 20
    p_c: float = 0.45
    p_m: float = 0.1
    mutation_std: float = 0.1
    mutation_decay: float = 1.0  # per-generation decay of the gaussian std
    elitism: int = 1

    def validate(self) -> None:
        if self.pop_size < 2:
            raise ValueError("pop_size must be >= 2")
        if not (0.0 <= self.p_c <= 1.0 and 0.0 <= self.p_m <= 1.0):
            raise ValueError("rates must lie in [0, 1]")
        if self.elitism >= self.pop_size or self.elitism < 0:
            raise ValueError("elitism must be in [0, pop_size)")


@dataclass
class AgentParams:
    gamma: float = 0.95
    zeta: float = 0.05
    buffer_capacity: int = 10_000
    batch_size: int = 32
    actor_lr: float = 0.001
    critic_lr: float = 0.002
    noise_sigma0: float = 0.2
    noise_decay: float = 0.995
    noise_floor: float = 0.01
    hidden1: int = 128
    hidden2: int = 64
    lstm_hidden: int = 64
    lstm_skip: bool = True  # feed the raw last frame alongside the encoding
    use_lstm: bool = True

    def validate(self) -> None:
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must lie in (0, 1)")
        if not (0.0 < self.zeta <= 1.0):
            raise ValueError("zeta must lie in (0, 1]")


@dataclass
class ExperimentSpec:
    name: str = "adhoc"
    kind: str = "sweep"             # sweep | ga_trace | train_trace
    overrides: dict = field(default_factory=dict)
    schemes: list = field(default_factory=lambda: ["DGL_DDPG"])
    sweep_field: str | None = None  # SystemConfig field being swept
    grid: list = field(default_factory=lambda: [0.0])
    episodes: int = 300
    reps: int = 10
    seed: int = 0
    out_dir: str = "out"
    detail_logs: bool = False
    jobs: int = 1
    ga: GaParams = field(default_factory=GaParams)
    agent: AgentParams = field(default_factory=AgentParams)

    def validate(self) -> None:
        from .baselines import SCHEME_IDS

        if not self.grid:
            raise ValueError("sweep grid must be non-empty")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        for s in self.schemes:
            if s not in SCHEME_IDS:
                raise ValueError(f"unknown scheme: {s}")
        SystemConfig().replace(**self.overrides)
        if self.sweep_field is not None:
            SystemConfig().replace(**{self.sweep_field: self.grid[0]})
        self.ga.validate()
        self.agent.validate()

    @classmethod
    def from_json(cls, path: str) -> "ExperimentSpec":
        with open(path) as fh:
            raw = json.load(fh)
        ga = GaParams(**raw.pop("ga", {}))
        agent = AgentParams(**raw.pop("agent", {}))
        spec = cls(**raw, ga=ga, agent=agent)
        spec.validate()
        return spec
