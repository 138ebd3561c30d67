"""Experiment orchestration: the two-timescale run loop, metrics, sweeps.

Outputs per run directory:
  metrics.csv      one row per (scheme, sweep value, replication, episode)
  trace_<scheme>.csv   per-episode assembled reward, per replication
  ga_trace.csv     (ga_trace runs) per-generation best fitness per variant/seed
  detail_*.csv     optional per-slot logs with sha256 sidecars
  timing.csv       wall time per cell (kept out of metrics.csv so reruns
                   with the same root seed are byte-identical)
  ckpt/            agent checkpoints

All files are written atomically (tmp + rename).
"""
from __future__ import annotations

import dataclasses
import hashlib
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .agent import CachingAgent, Transition, compute_reward, featurize
from .baselines import (SCHEME_WIRING, joint_ga_cache, popular_cache,
                        random_cache, solve_offra_slots)
from .config import GB, GHZ, MHZ, ExperimentSpec, GaParams, SystemConfig
from .env import (ServiceCatalog, SlotContext, SmallState, Topology,
                  evaluate_slot, sample_gains, sample_task_batch, switching_cost,
                  update_small_state)
from .rng import stream

METRICS_HEADER = ("scheme,sweep_value,replication,episode,"
                  "u_large,u_small_mean,switch_cost_total,violations")
DETAIL_HEADER = "episode,i,k,sum_q,mean_q,cost"


@dataclass
class MetricsRow:
    scheme: str
    sweep_value: float
    replication: int
    episode: int
    u_large: float
    u_small_mean: float
    switch_cost_total: float
    violations: int
    wall_time: float = 0.0  # reported via timing.csv, not metrics.csv

    def csv(self) -> str:
        return (f"{self.scheme},{self.sweep_value!r},{self.replication},"
                f"{self.episode},{self.u_large!r},{self.u_small_mean!r},"
                f"{self.switch_cost_total!r},{self.violations}")


@dataclass
class EpisodeResult:
    u_large: float
    u_small_mean: float
    switch_cost_total: float
    violations: int
    reward: float
    detail: list  # (i, k, sum_q, mean_q, cost) tuples


def run_episode(cfg: SystemConfig, catalog: ServiceCatalog, topo: Topology,
                scheme: str, agent: CachingAgent | None, ga_params: GaParams,
                env_stream, pol_rng: np.random.Generator,
                train: bool = True) -> EpisodeResult:
    """One episode of the two-timescale loop (I large slots of K small slots)."""
    cache_kind, offra_kind = SCHEME_WIRING[scheme]
    c_prev = np.zeros((cfg.M, cfg.F))
    state = SmallState.zeros(cfg)
    din = cfg.M * cfg.F + cfg.F + cfg.M * cfg.F
    prev_seq = np.zeros((cfg.K, din))

    u_large = 0.0
    cost_total = 0.0
    reward_total = 0.0
    violations = 0
    mean_qs = []
    detail = []

    for i in range(cfg.I):
        # pre-draw this large slot's tasks and channels (streams are keyed,
        # so drawing early does not perturb anything else)
        batches = [sample_task_batch(catalog, cfg, env_stream("tasks", i, k))
                   for k in range(cfg.K)]
        gains = [sample_gains(topo, cfg, env_stream("chan", i, k))
                 for k in range(cfg.K)]

        if agent is not None:
            c_new, c_raw = agent.act(prev_seq, explore=train, rng=pol_rng,
                                     catalog=catalog)
        elif cache_kind == "popular":
            c_new = popular_cache(state.p, catalog, cfg)
            c_raw = c_new
        elif cache_kind == "random":
            c_new = random_cache(catalog, cfg, pol_rng)
            c_raw = c_new
        elif cache_kind == "joint_ga":
            ctx0 = SlotContext(batches[0], gains[0], c_prev, topo, catalog, cfg)
            c_new = joint_ga_cache(ctx0, ga_params, pol_rng)
            c_raw = c_new
        else:
            raise ValueError(f"unknown cache policy: {cache_kind}")

        cost_i = switching_cost(c_prev, c_new, catalog, cfg.R_back)
        qsum_i = 0.0
        seq_states = np.empty((cfg.K, din))
        contexts = [SlotContext(batches[k], gains[k], c_new, topo, catalog, cfg)
                    for k in range(cfg.K)]
        offras = solve_offra_slots(offra_kind, contexts, ga_params, pol_rng)
        for k in range(cfg.K):
            offra = offras[k]
            outcome = evaluate_slot(batches[k], c_new, offra, gains[k], topo, cfg)
            state = update_small_state(state, batches[k], offra, outcome, c_new, cfg)
            seq_states[k] = featurize(state)
            sum_q = float(outcome.qos.sum())
            mean_q = float(outcome.qos.mean())
            qsum_i += sum_q
            mean_qs.append(mean_q)
            violations += int((~outcome.ok_delay | ~outcome.ok_energy).sum())
            detail.append((i, k, sum_q, mean_q, cost_i if k == 0 else 0.0))

        r_i = compute_reward(qsum_i, c_prev, c_raw, c_new, catalog, cfg)
        reward_total += r_i
        u_large += qsum_i - cfg.delta * cost_i
        cost_total += cost_i

        if agent is not None:
            agent.buffer.push(Transition(prev_seq.copy(), c_new.ravel().copy(),
                                         r_i, seq_states.copy()))
            if train and len(agent.buffer) >= agent.params.batch_size:
                agent.train_step(pol_rng)

        prev_seq = seq_states
        c_prev = c_new

    return EpisodeResult(u_large, float(np.mean(mean_qs)), cost_total,
                         violations, reward_total, detail)


def run_cell(spec: ExperimentSpec, scheme: str, value: float, rep: int):
    """One (scheme, sweep value, replication) job: full training run."""
    base = SystemConfig().replace(**spec.overrides)
    if spec.sweep_field is None:
        cfg = base
    else:
        # grid values arrive as floats; integer fields (M, N, ...) must stay int
        cast = type(getattr(base, spec.sweep_field))
        cfg = base.replace(**{spec.sweep_field: cast(value)})
    root = spec.seed
    # only M/N/F reshape the scenario (positions, arrivals, channels, network
    # sizes); sweeps over other fields reuse identical draws at every sweep
    # value so those comparisons are paired
    if spec.sweep_field in ("M", "N", "F"):
        sf, sv = spec.sweep_field, float(value)
    else:
        sf, sv = "none", 0.0
    env_key = ("env", sf, sv, rep)
    # catalog and topology are shared across replications and schemes so
    # replication noise comes from tasks/channels/policy, not scenario redraws
    catalog = ServiceCatalog.generate(cfg, stream(root, "catalog"))
    topo = Topology.generate(cfg, stream(root, "topo", sf, sv))

    cache_kind, _ = SCHEME_WIRING[scheme]
    agent = None
    if cache_kind in ("agent_lstm", "agent_plain"):
        ap = dataclasses.replace(spec.agent, use_lstm=(cache_kind == "agent_lstm"))
        agent = CachingAgent(cfg, ap, stream(root, scheme, sf, sv, rep, "init"))

    t0 = time.monotonic()
    rows, trace, details = [], [], []
    for ep in range(spec.episodes):
        if agent is not None:
            agent.set_episode(ep)

        def env_stream(*keys, _ep=ep):
            return stream(root, *env_key, "ep", _ep, *keys)

        pol_rng = stream(root, scheme, sf, sv, rep, "ep", ep)
        res = run_episode(cfg, catalog, topo, scheme, agent, spec.ga,
                          env_stream, pol_rng, train=True)
        rows.append(MetricsRow(scheme, float(value), rep, ep, res.u_large,
                               res.u_small_mean, res.switch_cost_total,
                               res.violations))
        trace.append((rep, ep, res.reward))
        if spec.detail_logs:
            details.extend((ep,) + d for d in res.detail)
    wall = time.monotonic() - t0

    ckpt = None
    if agent is not None:
        ckpt = (scheme, float(value), rep, agent)
    return rows, trace, details, wall, ckpt


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_detail(path: str, rows) -> None:
    lines = [DETAIL_HEADER]
    lines += [f"{ep},{i},{k},{sq!r},{mq!r},{c!r}" for ep, i, k, sq, mq, c in rows]
    text = "\n".join(lines) + "\n"
    _atomic_write(path, text)
    digest = hashlib.sha256(text.encode()).hexdigest()
    _atomic_write(path + ".sha256", digest + "\n")


def _cell_runner(args):
    return run_cell(*args)


def run(spec: ExperimentSpec) -> str:
    """Execute an experiment spec; returns the output directory."""
    spec.validate()
    out = spec.out_dir
    os.makedirs(out, exist_ok=True)
    if spec.kind == "ga_trace":
        return _run_ga_trace(spec)

    grid = spec.grid if spec.sweep_field is not None else [0.0]
    cells = [(spec, scheme, float(v), rep)
             for scheme in spec.schemes for v in grid for rep in range(spec.reps)]

    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            results = list(pool.map(_cell_runner, cells, chunksize=1))
    else:
        results = [run_cell(*c) for c in cells]

    metrics_lines = [METRICS_HEADER]
    traces: dict[str, list] = {s: [] for s in spec.schemes}
    timing_lines = ["scheme,sweep_value,replication,wall_time"]
    os.makedirs(os.path.join(out, "ckpt"), exist_ok=True)

    for (_spec, scheme, value, rep), (rows, trace, details, wall, ckpt) in zip(cells, results):
        metrics_lines += [r.csv() for r in rows]
        traces[scheme] += [(value, r, e, rw) for r, e, rw in trace]
        timing_lines.append(f"{scheme},{value!r},{rep},{wall!r}")
        if spec.detail_logs and details:
            _write_detail(os.path.join(out, f"detail_{scheme}_{value:g}_{rep}.csv"),
                          details)
        if ckpt is not None:
            scheme_, v_, rep_, agent = ckpt
            agent.save(os.path.join(out, "ckpt", f"{scheme_}_{v_:g}_{rep_}.npz"))

    _atomic_write(os.path.join(out, "metrics.csv"),
                  "\n".join(metrics_lines) + "\n")
    for scheme, rows in traces.items():
        lines = ["sweep_value,replication,episode,reward"]
        lines += [f"{v!r},{r},{e},{rw!r}" for v, r, e, rw in rows]
        _atomic_write(os.path.join(out, f"trace_{scheme}.csv"),
                      "\n".join(lines) + "\n")
    _atomic_write(os.path.join(out, "timing.csv"), "\n".join(timing_lines) + "\n")
    return out


def ga_convergence_traces(spec: ExperimentSpec):
    """Improved vs traditional GA best-fitness traces on seeded default slots."""
    cfg = SystemConfig().replace(**spec.overrides)
    from . import ga as ga_mod

    rows = []
    for seed in range(spec.reps):
        catalog = ServiceCatalog.generate(cfg, stream(spec.seed, "ga_trace", seed, "catalog"))
        topo = Topology.generate(cfg, stream(spec.seed, "ga_trace", seed, "topo"))
        cache = random_cache(catalog, cfg, stream(spec.seed, "ga_trace", seed, "cache"))
        batch = sample_task_batch(catalog, cfg, stream(spec.seed, "ga_trace", seed, "tasks"))
        gains = sample_gains(topo, cfg, stream(spec.seed, "ga_trace", seed, "chan"))
        ctx = SlotContext(batch, gains, cache, topo, catalog, cfg)
        for variant in ("improved", "traditional"):
            rng = stream(spec.seed, "ga_trace", seed, variant)
            _, trace = ga_mod.solve(ctx, spec.ga, rng, variant=variant)
            rows += [(variant, seed, g, float(t)) for g, t in enumerate(trace)]
    return rows


def _run_ga_trace(spec: ExperimentSpec) -> str:
    rows = ga_convergence_traces(spec)
    lines = ["variant,seed,generation,best_fitness"]
    lines += [f"{v},{s},{g},{t!r}" for v, s, g, t in rows]
    _atomic_write(os.path.join(spec.out_dir, "ga_trace.csv"),
                  "\n".join(lines) + "\n")
    return spec.out_dir


def recompute_metrics(detail_path: str, cfg: SystemConfig | None = None):
    """Recompute per-episode U_large / U_small from a per-slot detail log.

    Verifies the sha256 sidecar first; returns {episode: (u_large, u_small_mean)}.
    """
    cfg = cfg or SystemConfig()
    with open(detail_path) as fh:
        text = fh.read()
    sidecar = detail_path + ".sha256"
    if os.path.exists(sidecar):
        with open(sidecar) as fh:
            expected = fh.read().strip()
        if hashlib.sha256(text.encode()).hexdigest() != expected:
            raise ValueError(f"detail log {detail_path} fails its checksum")
    lines = text.strip().split("\n")
    if lines[0] != DETAIL_HEADER:
        raise ValueError("unexpected detail log header")

    per_ep: dict[int, list] = {}
    for line in lines[1:]:
        ep, i, k, sq, mq, c = line.split(",")
        per_ep.setdefault(int(ep), []).append(
            (int(i), int(k), float(sq), float(mq), float(c)))

    out = {}
    for ep, rows in sorted(per_ep.items()):
        u_large = 0.0
        mean_qs = []
        qsum_i = 0.0
        cost_i = 0.0
        last_i = None
        for i, k, sq, mq, c in rows:
            if last_i is not None and i != last_i:
                u_large += qsum_i - cfg.delta * cost_i
                qsum_i = 0.0
            if k == 0:
                cost_i = c
            qsum_i += sq
            mean_qs.append(mq)
            last_i = i
        u_large += qsum_i - cfg.delta * cost_i
        out[ep] = (u_large, float(np.mean(mean_qs)))
    return out


def sweep_presets() -> dict[str, ExperimentSpec]:
    """Named desk-scale experiment presets mirroring the evaluation figures."""
    drl = ["DGL_DDPG", "DDPG", "GA_ALL", "POPULAR_CACHE"]
    short = ["DGL_DDPG", "POPULAR_CACHE", "AVE_RESOURCE", "NO_COOPERATION",
             "RANDOM_CACHE", "RANDOM_OFF"]
    presets = {
        "fig4": ExperimentSpec(
            name="fig4", kind="ga_trace", reps=10,
            ga=GaParams(generations=40)),
        "fig5": ExperimentSpec(
            name="fig5", sweep_field="C_m",
            grid=[20 * GB, 30 * GB, 40 * GB, 50 * GB, 60 * GB],
            schemes=drl, episodes=40, reps=3),
        "fig6": ExperimentSpec(
            name="fig6", sweep_field="M", grid=[2, 3, 4, 5],
            schemes=["DGL_DDPG", "DDPG", "GA_ALL", "NO_COOPERATION"],
            episodes=40, reps=3),
        "fig7": ExperimentSpec(
            name="fig7", sweep_field="N", grid=[20, 30, 40, 50],
            schemes=short, episodes=40, reps=3),
        # bandwidth grid is not published; extrapolated around the default
        "fig8": ExperimentSpec(
            name="fig8", sweep_field="W_m",
            grid=[10 * MHZ, 15 * MHZ, 20 * MHZ, 25 * MHZ, 30 * MHZ],
            schemes=short, episodes=40, reps=3),
        "fig9": ExperimentSpec(
            name="fig9", sweep_field="F_m",
            grid=[20 * GHZ, 22.5 * GHZ, 25 * GHZ, 27.5 * GHZ, 30 * GHZ],
            schemes=short, episodes=40, reps=3),
        "fig_train": ExperimentSpec(
            name="fig_train", kind="train_trace",
            schemes=["DGL_DDPG", "DDPG", "GA_ALL", "RANDOM_CACHE"],
            episodes=300, reps=10),
    }
    return presets
