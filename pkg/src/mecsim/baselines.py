"""The seven comparison schemes, behind the same decision interfaces as the
main stack. Cache policies return M x F binary matrices; Off-RA policies
return repaired OffRaDecisions.
"""
from __future__ import annotations

import numpy as np

from . import ga
from .config import GaParams, SystemConfig
from .env import LOCAL, OffRaDecision, ServiceCatalog, SlotContext

SCHEME_IDS = (
    "DGL_DDPG", "DDPG", "GA_ALL", "NO_COOPERATION",
    "AVE_RESOURCE", "POPULAR_CACHE", "RANDOM_CACHE", "RANDOM_OFF",
)

# scheme -> (cache policy kind, off-ra policy kind)
SCHEME_WIRING = {
    "DGL_DDPG": ("agent_lstm", "improved"),
    "DDPG": ("agent_plain", "improved"),
    "GA_ALL": ("joint_ga", "traditional"),
    "NO_COOPERATION": ("agent_lstm", "no_coop"),
    "AVE_RESOURCE": ("agent_lstm", "equal_fracs"),
    "POPULAR_CACHE": ("popular", "improved"),
    "RANDOM_CACHE": ("random", "improved"),
    "RANDOM_OFF": ("agent_lstm", "random"),
}


def popular_cache(popularity: np.ndarray, catalog: ServiceCatalog,
                  cfg: SystemConfig) -> np.ndarray:
    """Per ES, greedily cache highest-popularity services until capacity;
    ties break toward the lower service index."""
    c = np.zeros((cfg.M, cfg.F))
    for m in range(cfg.M):
        order = np.lexsort((np.arange(cfg.F), -popularity[m]))
        used = 0.0
        for f_idx in order:
            size = float(catalog.cache_sizes[f_idx])
            if used + size <= cfg.C_m:
                c[m, f_idx] = 1.0
                used += size
    return c


def random_cache(catalog: ServiceCatalog, cfg: SystemConfig,
                 rng: np.random.Generator) -> np.ndarray:
    """Uniformly shuffled service list per ES, greedily added while it fits."""
    c = np.zeros((cfg.M, cfg.F))
    for m in range(cfg.M):
        used = 0.0
        for f_idx in rng.permutation(cfg.F):
            size = float(catalog.cache_sizes[f_idx])
            if used + size <= cfg.C_m:
                c[m, f_idx] = 1.0
                used += size
    return c


def random_off(ctx: SlotContext, rng: np.random.Generator) -> OffRaDecision:
    """Uniform targets and fractions, pushed through the standard repair."""
    n = len(ctx.batch)
    targets = rng.integers(0, ctx.cfg.M + 2, n)
    f = rng.random(n)
    b = rng.random(n)
    t, f, b = ga.decode_population(targets, f, b, ctx)
    return OffRaDecision(t, f, b)


def _repair_cache_bits(bits: np.ndarray, catalog: ServiceCatalog,
                       cfg: SystemConfig) -> np.ndarray:
    """Greedy capacity repair: keep services in index order while they fit."""
    sized = bits * catalog.cache_sizes[None, None, :]
    cum = np.cumsum(sized, axis=-1)
    return np.where(cum <= cfg.C_m, bits, 0.0)


def joint_ga_cache(ctx: SlotContext, params: GaParams,
                   rng: np.random.Generator) -> np.ndarray:
    """Traditional discrete-coded GA over the joint (cache, Off-RA) chromosome,
    myopically optimizing the given slot context. Returns the cache matrix of
    the best individual."""
    cfg = ctx.cfg
    P, L = params.pop_size, params.generations
    N = len(ctx.batch)
    n_targets = cfg.M + 2

    cbits = rng.integers(0, 2, (P, cfg.M, cfg.F)).astype(float)
    targets = rng.integers(0, n_targets, (P, N))
    fi = rng.integers(0, ga.FRAC_GRID + 1, (P, N))
    bi = rng.integers(0, ga.FRAC_GRID + 1, (P, N))

    best_fit = -np.inf
    best_cache = np.zeros((cfg.M, cfg.F))
    for gen in range(L):
        caches = _repair_cache_bits(cbits, ctx.catalog, cfg)
        dt, df, db = ga.decode_population(
            targets, fi / ga.FRAC_GRID, bi / ga.FRAC_GRID, ctx,
            cache_override=caches)
        fit = ga.fitness_population(dt, df, db, ctx)
        top = int(np.argmax(fit))
        if fit[top] > best_fit:
            best_fit = float(fit[top])
            best_cache = caches[top].copy()
        if gen == L - 1:
            break

        elite = np.argsort(fit)[::-1][: params.elitism]
        n_off = P - params.elitism
        pairs = (n_off + 1) // 2
        pa = ga.select_parents(fit, pairs, rng)
        pb = ga.select_parents(fit, pairs, rng)

        flat = cbits.reshape(P, -1)
        do = (rng.random(pairs) < params.p_c)[:, None]
        blocks = []
        for a, b_ in ((flat[pa], flat[pb]), (targets[pa], targets[pb]),
                      (fi[pa], fi[pb]), (bi[pa], bi[pb])):
            mask = do & (rng.random(a.shape) < 0.5)
            blocks.append(np.concatenate([np.where(mask, b_, a),
                                          np.where(mask, a, b_)]))
        oc, ot, of, ob = blocks
        mc = rng.random(oc.shape) < params.p_m
        oc = np.where(mc, rng.integers(0, 2, oc.shape).astype(float), oc)
        mt = rng.random(ot.shape) < params.p_m
        ot = np.where(mt, rng.integers(0, n_targets, ot.shape), ot)
        for arr in (of, ob):
            m = rng.random(arr.shape) < params.p_m
            arr[m] = rng.integers(0, ga.FRAC_GRID + 1, int(m.sum()))

        cbits = np.concatenate([flat[elite], oc[:n_off]]).reshape(-1, cfg.M, cfg.F)
        targets = np.concatenate([targets[elite], ot[:n_off]])
        fi = np.concatenate([fi[elite], of[:n_off]])
        bi = np.concatenate([bi[elite], ob[:n_off]])
    return best_cache


# off-ra policy kind -> (GA mode, GA variant)
_GA_KINDS = {
    "improved": (None, "improved"),
    "traditional": (None, "traditional"),
    "no_coop": ("no_coop", "improved"),
    "equal_fracs": ("equal_fracs", "improved"),
}


def solve_offra(kind: str, ctx: SlotContext, params: GaParams,
                rng: np.random.Generator) -> OffRaDecision:
    """Dispatch an Off-RA policy kind to its solver."""
    if kind == "random":
        return random_off(ctx, rng)
    if kind not in _GA_KINDS:
        raise ValueError(f"unknown off-ra policy: {kind}")
    mode, variant = _GA_KINDS[kind]
    decision, _ = ga.solve(ctx, params, rng, mode=mode, variant=variant)
    return decision


def solve_offra_slots(kind: str, contexts: list[SlotContext], params: GaParams,
                      rng: np.random.Generator) -> list[OffRaDecision]:
    """Batched dispatch: one decision per slot context (shared cache)."""
    if kind == "random":
        return [random_off(ctx, rng) for ctx in contexts]
    if kind not in _GA_KINDS:
        raise ValueError(f"unknown off-ra policy: {kind}")
    mode, variant = _GA_KINDS[kind]
    decisions, _ = ga.solve_slots(contexts, params, rng, mode=mode, variant=variant)
    return decisions
