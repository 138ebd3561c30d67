import numpy as np
import pytest

from mecsim.config import GaParams, SystemConfig
from mecsim.env import ServiceCatalog, SlotContext, TaskBatch, Topology
from mecsim.rng import stream


def make_topology(cfg: SystemConfig, seed: int = 0) -> Topology:
    return Topology.generate(cfg, stream(seed, "topo"))


def make_catalog(cfg: SystemConfig, seed: int = 0) -> ServiceCatalog:
    return ServiceCatalog.generate(cfg, stream(seed, "catalog"))


def snr_gain(cfg: SystemConfig, snr: float) -> float:
    """Channel gain h such that p_n * h / sigma2 equals the given SNR."""
    return snr * cfg.sigma2 / cfg.p_n


def make_ctx(cfg: SystemConfig, seed: int = 0, cache=None) -> SlotContext:
    from mecsim.env import sample_gains, sample_task_batch

    catalog = make_catalog(cfg, seed)
    topo = make_topology(cfg, seed)
    batch = sample_task_batch(catalog, cfg, stream(seed, "tasks"))
    gains = sample_gains(topo, cfg, stream(seed, "chan"))
    if cache is None:
        cache = np.ones((cfg.M, cfg.F))
    return SlotContext(batch, gains, cache, topo, catalog, cfg)


@pytest.fixture
def cfg():
    return SystemConfig()


@pytest.fixture
def ga_params():
    return GaParams()


def single_td_topology(cfg: SystemConfig, dist: float = 1.0) -> Topology:
    """One TD per configured N, all at the same distance from ES 0."""
    td = np.tile([[dist, 0.0]], (cfg.N, 1))
    es = np.zeros((max(cfg.M, 1), 2))
    es[1:, 0] = 1e6  # park other ESs far away
    d = np.linalg.norm(td[:, None, :] - es[None, :, :], axis=2)
    d = np.maximum(d, 1.0)
    return Topology(td, es, np.argmin(d, axis=1), d)


def batch_of(types, input_bits, densities) -> TaskBatch:
    types = np.asarray(types, dtype=np.int64)
    input_bits = np.asarray(input_bits, dtype=float)
    dens = np.asarray(densities, dtype=float)
    return TaskBatch(types, input_bits, input_bits * dens[types])
