"""Hybrid-coding genetic Off-RA solver.

Chromosome = one discrete target block plus two continuous fraction blocks,
all of length N. The improved variant uses mean crossover on the continuous
blocks plus a self-crossover pass; the traditional variant uses plain uniform
swap crossover with fractions discretized on an 11-point grid.

Population state is kept as (P, N) arrays so a generation is a handful of
vectorized calls.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import GaParams
from .env import LOCAL, OffRaDecision, SlotContext, evaluate

FITNESS_FLOOR = math.exp(-3.0)

FRAC_GRID = 10  # traditional coding: fraction gene g decodes to g / FRAC_GRID


@dataclass
class Chromosome:
    targets: np.ndarray  # (N,) int in {0..M+1}
    f: np.ndarray        # (N,) in [0,1]
    b: np.ndarray        # (N,) in [0,1]

    def copy(self) -> "Chromosome":
        return Chromosome(self.targets.copy(), self.f.copy(), self.b.copy())


def decode_population(targets, f, b, ctx: SlotContext, mode: str | None = None,
                      cache_override: np.ndarray | None = None):
    """Structural repair, vectorized over a leading population axis.

    Repairs: uncached/starved ES targets to cloud, bandwidth-starved offloads
    to local, fraction sums scaled into the per-ES budget, and forced zero
    fractions for local/cloud. `mode` restricts the target domain:
    "no_coop" folds every ES target onto the associated ES, "equal_fracs"
    overrides fractions with an even split. `cache_override` may carry one
    cache matrix per population member, shape (P, M, F).
    """
    cfg = ctx.cfg
    M = cfg.M
    assoc = ctx.topo.assoc
    types = ctx.batch.types

    t = np.array(targets, copy=True)
    f = np.clip(f, 0.0, 1.0)
    b = np.clip(b, 0.0, 1.0)

    is_es = (t != LOCAL) & (t != M + 1)
    if mode == "no_coop":
        t = np.where(is_es, assoc + 1, t)
        is_es = (t != LOCAL) & (t != M + 1)

    es_idx = np.where(is_es, t - 1, 0)
    if cache_override is not None and cache_override.ndim == 3:
        rows = np.arange(len(cache_override))[:, None]
        cached = cache_override[rows, es_idx, types[None, :]] > 0
    else:
        cache = ctx.cache if cache_override is None else cache_override
        cached = cache[es_idx, types] > 0
    t = np.where(is_es & ~cached, M + 1, t)
    is_es = (t != LOCAL) & (t != M + 1)

    if mode == "equal_fracs":
        f = np.zeros_like(f)
        b = np.zeros_like(b)
        for m in range(M):
            on_m = is_es & (t == m + 1)
            cnt = on_m.sum(axis=-1, keepdims=True)
            f = np.where(on_m, 1.0 / np.maximum(cnt, 1), f)
        offload = t != LOCAL
        for m in range(M):
            from_m = offload & (assoc == m)
            cnt = from_m.sum(axis=-1, keepdims=True)
            b = np.where(from_m, 1.0 / np.maximum(cnt, 1), b)
        return t, f, b

    # ES targets need an actual compute share (17a), offloads need bandwidth
    t = np.where(is_es & (f <= 0.0), M + 1, t)
    is_es = (t != LOCAL) & (t != M + 1)
    t = np.where((t != LOCAL) & (b <= 0.0), LOCAL, t)
    is_es = (t != LOCAL) & (t != M + 1)
    is_local = t == LOCAL

    f = np.where(is_es, f, 0.0)
    b = np.where(is_local, 0.0, b)

    for m in range(M):
        on_m = t == m + 1
        s = (f * on_m).sum(axis=-1, keepdims=True)
        f = np.where(on_m & (s > 1.0), f / np.maximum(s, 1e-300), f)
    offload = ~is_local
    for m in range(M):
        from_m = offload & (assoc == m)
        s = (b * from_m).sum(axis=-1, keepdims=True)
        b = np.where(from_m & (s > 1.0), b / np.maximum(s, 1e-300), b)
    return t, f, b


def fitness_population(targets, f, b, ctx: SlotContext) -> np.ndarray:
    """Piecewise fitness: sum of QoS, collapsed to e^-3 on any threshold hit.

    Expects decoded (repaired) decisions. The sum is also floored at e^-3 so
    roulette probabilities stay positive when QoS is negative.
    """
    cfg = ctx.cfg
    T, E, Q = evaluate(ctx.batch, targets, f, b, ctx.gains, ctx.topo, cfg,
                       rate_full=ctx.rate_full)
    violated = ((T > cfg.T_th) | (E > cfg.E_th)).any(axis=-1)
    total = Q.sum(axis=-1)
    return np.where(violated, FITNESS_FLOOR, np.maximum(total, FITNESS_FLOOR))


def decode(chrom: Chromosome, ctx: SlotContext, mode: str | None = None) -> OffRaDecision:
    t, f, b = decode_population(chrom.targets, chrom.f, chrom.b, ctx, mode)
    return OffRaDecision(t, f, b)


def fitness(chrom: Chromosome, ctx: SlotContext, mode: str | None = None) -> float:
    t, f, b = decode_population(chrom.targets, chrom.f, chrom.b, ctx, mode)
    return float(fitness_population(t, f, b, ctx))


def select_parents(fitnesses: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Roulette-wheel draw of n parent indices, proportional to fitness."""
    fitnesses = np.asarray(fitnesses, dtype=float)
    cum = np.cumsum(fitnesses)
    return np.searchsorted(cum, rng.random(n) * cum[-1], side="right")


def _swap_positions(arr: np.ndarray, rows: np.ndarray, rng: np.random.Generator) -> None:
    """In-place swap of two random gene positions on the given rows of a
    row-major (..., n) array viewed as (rows, n)."""
    if len(rows) == 0:
        return
    flat = arr.reshape(-1, arr.shape[-1])
    n = flat.shape[1]
    i = rng.integers(0, n, len(rows))
    j = rng.integers(0, n, len(rows))
    tmp = flat[rows, i].copy()
    flat[rows, i] = flat[rows, j]
    flat[rows, j] = tmp


def _cross_pairs_improved(ta, fa, ba, tb, fb, bb, p_c, rng):
    """Uniform swap on the discrete block, gene-wise mean on continuous blocks,
    then a per-offspring self-crossover pass, each applied with probability p_c.

    Blocks are (K, pairs, n); offspring come back as (K, 2 * pairs, n)."""
    K, pairs, n = ta.shape
    do = (rng.random((K, pairs)) < p_c)[..., None]
    md, mf, mb = do & (rng.random((3, K, pairs, n)) < 0.5)

    ta2 = np.where(md, tb, ta)
    tb2 = np.where(md, ta, tb)
    fmean = 0.5 * (fa + fb)
    bmean = 0.5 * (ba + bb)
    fa2 = np.where(mf, fmean, fa)
    fb2 = np.where(mf, fmean, fb)
    ba2 = np.where(mb, bmean, ba)
    bb2 = np.where(mb, bmean, bb)

    t = np.concatenate([ta2, tb2], axis=1)
    f = np.concatenate([fa2, fb2], axis=1)
    b = np.concatenate([ba2, bb2], axis=1)
    rows = np.flatnonzero(rng.random(K * 2 * pairs) < p_c)
    _swap_positions(t, rows, rng)
    _swap_positions(f, rows, rng)
    _swap_positions(b, rows, rng)
    return t, f, b


def _cross_pairs_traditional(ta, fa, ba, tb, fb, bb, p_c, rng):
    """Classic single-point crossover on the concatenated gene string
    (targets | compute | bandwidth); no mean blending, no self-crossover."""
    K, pairs, n = ta.shape
    do = rng.random((K, pairs)) < p_c
    cut = rng.integers(1, 3 * n, (K, pairs))
    pos = np.arange(3 * n)
    tail = do[..., None] & (pos[None, None, :] >= cut[..., None])
    a = np.concatenate([ta, fa, ba], axis=-1)
    b = np.concatenate([tb, fb, bb], axis=-1)
    a2 = np.where(tail, b, a)
    b2 = np.where(tail, a, b)
    out = np.concatenate([a2, b2], axis=1)
    return out[..., :n], out[..., n:2 * n], out[..., 2 * n:]


def crossover(parent_a: Chromosome, parent_b: Chromosome, p_c: float,
              rng: np.random.Generator) -> tuple[Chromosome, Chromosome]:
    t, f, b = _cross_pairs_improved(
        parent_a.targets[None, None], parent_a.f[None, None], parent_a.b[None, None],
        parent_b.targets[None, None], parent_b.f[None, None], parent_b.b[None, None],
        p_c, rng)
    return Chromosome(t[0, 0], f[0, 0], b[0, 0]), Chromosome(t[0, 1], f[0, 1], b[0, 1])


def _mutate_improved(t, f, b, n_targets, p_m, std, rng):
    mt = rng.random(t.shape) < p_m
    t = np.where(mt, rng.integers(0, n_targets, t.shape), t)
    mfb = rng.random((2,) + f.shape) < p_m
    noise = rng.normal(0.0, std, (2,) + f.shape)
    for arr, m, nz in ((f, mfb[0], noise[0]), (b, mfb[1], noise[1])):
        arr += np.where(m, nz, 0.0)
        np.clip(arr, 0.0, 1.0, out=arr)
    return t, f, b


def mutate(chrom: Chromosome, p_m: float, std: float, n_targets: int,
           rng: np.random.Generator) -> Chromosome:
    c = chrom.copy()
    t, f, b = _mutate_improved(c.targets[None], c.f[None], c.b[None],
                               n_targets, p_m, std, rng)
    return Chromosome(t[0], f[0], b[0])


def _stack_contexts(contexts: list[SlotContext]) -> SlotContext:
    """Merge per-slot contexts (same cache/topology/catalog) into one whose
    task and channel arrays carry a leading (K, 1) slot axis, so all slots
    evaluate through the same broadcasting rules as a population."""
    from .env import TaskBatch

    first = contexts[0]
    if len(contexts) == 1:
        return first
    batch = TaskBatch(
        np.stack([c.batch.types for c in contexts])[:, None, :],
        np.stack([c.batch.input_bits for c in contexts])[:, None, :],
        np.stack([c.batch.comp_cycles for c in contexts])[:, None, :],
    )
    gains = np.stack([c.gains for c in contexts])[:, None, :]
    return SlotContext(batch, gains, first.cache, first.topo, first.catalog,
                       first.cfg)


def _select_parents_batch(fit: np.ndarray, n: int,
                          rng: np.random.Generator) -> np.ndarray:
    """Roulette per slot: fit is (K, P), result is (K, n) parent indices."""
    cum = np.cumsum(fit, axis=1)
    draws = rng.random((fit.shape[0], n)) * cum[:, -1:]
    return (cum[:, None, :] < draws[:, :, None]).sum(axis=2)


def solve_slots(contexts: list[SlotContext], params: GaParams,
                rng: np.random.Generator, mode: str | None = None,
                variant: str = "improved"):
    """Run the GA on several slots at once (shared cache and topology).

    All slots evolve in lockstep as one (K, P, N) tensor; selection stays
    independent per slot. Returns (decisions, traces) with one OffRaDecision
    and one non-decreasing best-fitness trace per slot.
    """
    ctx = _stack_contexts(contexts)
    cfg = ctx.cfg
    P, L = params.pop_size, params.generations
    K = len(contexts)
    N = len(contexts[0].batch)
    n_targets = cfg.M + 2
    traditional = variant == "traditional"
    krows = np.arange(K)[:, None]

    targets = rng.integers(0, n_targets, (K, P, N))
    if traditional:
        fi = rng.integers(0, FRAC_GRID + 1, (K, P, N))
        bi = rng.integers(0, FRAC_GRID + 1, (K, P, N))
    else:
        f = rng.random((K, P, N))
        b = rng.random((K, P, N))
    # feasibility anchors: an all-local individual and a greedy all-offload
    # individual (associated ES, even resource shares) per slot
    targets[:, 0] = LOCAL
    assoc_t = np.broadcast_to(ctx.topo.assoc + 1, (K, N))
    targets[:, 1] = assoc_t
    share = 1.0 / max(N, 1)
    if traditional:
        fi[:, 0] = 0
        bi[:, 0] = 0
        lvl = max(int(round(share * FRAC_GRID)), 1)
        fi[:, 1] = lvl
        bi[:, 1] = lvl
    else:
        f[:, 0] = 0.0
        b[:, 0] = 0.0
        f[:, 1] = share
        b[:, 1] = share

    best_fit = np.full(K, -np.inf)
    best: list[OffRaDecision | None] = [None] * K
    trace = np.empty((K, L))

    for gen in range(L):
        if traditional:
            f = fi / FRAC_GRID
            b = bi / FRAC_GRID
        dt, df, db = decode_population(targets, f, b, ctx, mode)
        fit = fitness_population(dt, df, db, ctx)
        top = fit.argmax(axis=1)
        vals = fit[np.arange(K), top]
        for k in np.flatnonzero(vals > best_fit):
            best_fit[k] = vals[k]
            j = top[k]
            best[k] = OffRaDecision(dt[k, j].copy(), df[k, j].copy(), db[k, j].copy())
        trace[:, gen] = best_fit
        if gen == L - 1:
            break

        elite = np.argsort(fit, axis=1)[:, ::-1][:, : params.elitism]
        n_off = P - params.elitism
        pairs = (n_off + 1) // 2
        pa = _select_parents_batch(fit, pairs, rng)
        pb = _select_parents_batch(fit, pairs, rng)
        if traditional:
            ot, of, ob = _cross_pairs_traditional(
                targets[krows, pa], fi[krows, pa], bi[krows, pa],
                targets[krows, pb], fi[krows, pb], bi[krows, pb],
                params.p_c, rng)
            mt = rng.random(ot.shape) < params.p_m
            ot = np.where(mt, rng.integers(0, n_targets, ot.shape), ot)
            for arr in (of, ob):
                m = rng.random(arr.shape) < params.p_m
                arr[m] = rng.integers(0, FRAC_GRID + 1, int(m.sum()))
            targets = np.concatenate([targets[krows, elite], ot[:, :n_off]], axis=1)
            fi = np.concatenate([fi[krows, elite], of[:, :n_off]], axis=1)
            bi = np.concatenate([bi[krows, elite], ob[:, :n_off]], axis=1)
        else:
            ot, of, ob = _cross_pairs_improved(
                targets[krows, pa], f[krows, pa], b[krows, pa],
                targets[krows, pb], f[krows, pb], b[krows, pb],
                params.p_c, rng)
            # explore early, exploit late: the gaussian step shrinks as the
            # population converges
            std = params.mutation_std * params.mutation_decay ** gen
            ot, of, ob = _mutate_improved(ot, of, ob, n_targets,
                                          params.p_m, std, rng)
            targets = np.concatenate([targets[krows, elite], ot[:, :n_off]], axis=1)
            f = np.concatenate([f[krows, elite], of[:, :n_off]], axis=1)
            b = np.concatenate([b[krows, elite], ob[:, :n_off]], axis=1)

    return best, trace


def solve(ctx: SlotContext, params: GaParams, rng: np.random.Generator,
          mode: str | None = None, variant: str = "improved"):
    """Run the GA on one slot; returns (best OffRaDecision, best-fitness trace).

    The trace records the best fitness seen up to each generation, so it is
    non-decreasing by construction (and elitism keeps the population best
    monotone as well).
    """
    best, trace = solve_slots([ctx], params, rng, mode, variant)
    return best[0], trace[0]
