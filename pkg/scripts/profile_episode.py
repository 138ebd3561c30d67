#!/usr/bin/env python3
"""Time one training episode per scheme at the default configuration."""
import time

import numpy as np

from mecsim.agent import CachingAgent
from mecsim.baselines import SCHEME_IDS, SCHEME_WIRING
from mecsim.config import AgentParams, GaParams, SystemConfig
from mecsim.env import ServiceCatalog, Topology
from mecsim.harness import run_episode
from mecsim.rng import stream


def main() -> None:
    cfg = SystemConfig()
    catalog = ServiceCatalog.generate(cfg, stream(0, "catalog"))
    topo = Topology.generate(cfg, stream(0, "topo"))
    ga = GaParams()
    for scheme in SCHEME_IDS:
        cache_kind, _ = SCHEME_WIRING[scheme]
        agent = None
        if cache_kind in ("agent_lstm", "agent_plain"):
            ap = AgentParams(use_lstm=cache_kind == "agent_lstm")
            agent = CachingAgent(cfg, ap, stream(0, scheme, "init"))
        times = []
        for ep in range(3):
            if agent is not None:
                agent.set_episode(ep)

            def env_stream(*keys, _ep=ep):
                return stream(0, "env", _ep, *keys)

            t0 = time.monotonic()
            run_episode(cfg, catalog, topo, scheme, agent, ga,
                        env_stream, stream(0, scheme, "ep", ep))
            times.append(time.monotonic() - t0)
        print(f"{scheme:15s} {np.mean(times):6.3f} s/episode")


if __name__ == "__main__":
    main()
