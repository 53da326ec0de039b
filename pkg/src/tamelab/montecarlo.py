"""Random-walk estimators for the weighted semigroup.

Walkers follow the continuous-time chain generated by L: exponential holding
times with rate (sum of incident weights)/m at the current node, jumps
proportional to edge weights, absorption through leakage edges. Along the
path they accumulate A_t = int V(X_s) ds, and estimate

    E_x[ exp(-A_t) f(X_t) ; alive at t ].

Randomness is counter-based per fixed-size walker block, so estimates are
bit-identical for any thread count; partial results are merged by pairwise
summation in block order.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .generator import GeneratorContext
from .perturbation import (VARIANCE_GUARD, TamingMeasure, node_potential,
                           taming_apply, zero_measure)
from .reports import finish_report
from .errors import StepTooLarge

log = logging.getLogger(__name__)

BLOCK = 4096


@dataclass(frozen=True)
class WalkerConfig:
    n_walkers: int = 100_000
    dt: float = 1e-3
    seed: int = 0
    scheme: str = "ctmc-exact"   # or "euler-split"

    def __post_init__(self):
        if self.n_walkers < 1:
            raise ValueError("n_walkers must be >= 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.scheme not in ("ctmc-exact", "euler-split"):
            raise ValueError(f"unknown scheme {self.scheme!r}")


@dataclass(frozen=True)
class WalkEstimate:
    mean: float
    stderr: float
    n_effective: float
    elapsed: float


class _JumpTable:
    """Padded neighbor table with cumulative jump probabilities; the final
    column is the killing branch."""

    def __init__(self, ctx: GeneratorContext):
        n = ctx.n
        W = ctx.W.tocsr()
        deg = np.diff(W.indptr)
        width = int(deg.max()) if n else 0
        nbr = np.full((n, width + 1), -1, dtype=np.int64)
        w = np.zeros((n, width + 1))
        for x in range(n):
            lo, hi = W.indptr[x], W.indptr[x + 1]
            nbr[x, :hi - lo] = W.indices[lo:hi]
            w[x, :hi - lo] = W.data[lo:hi]
        w[:, width] = ctx.leak
        total = w.sum(axis=1)
        self.rate = total / ctx.m
        with np.errstate(invalid="ignore", divide="ignore"):
            cum = np.cumsum(w, axis=1) / total[:, None]
        cum[total == 0] = 1.0
        self.cum = cum
        self.nbr = nbr
        self.kill_col = width


def _walk_block(table: _JumpTable, V, f_values, x0, t, size, rng, scheme, dt, log_domain):
    pos = np.full(size, x0, dtype=np.int64)
    remaining = np.full(size, float(t))
    acc = np.zeros(size)
    alive = np.ones(size, dtype=bool)
    if scheme == "ctmc-exact":
        while True:
            act = alive & (remaining > 0)
            if not act.any():
                break
            idx = np.flatnonzero(act)
            p = pos[idx]
            rate = table.rate[p]
            hold = np.where(rate > 0, rng.exponential(size=idx.size) / np.where(rate > 0, rate, 1.0),
                            np.inf)
            step = np.minimum(hold, remaining[idx])
            acc[idx] += V[p] * step
            remaining[idx] -= step
            jumping = hold < remaining[idx] + step  # holding expired before t
            jidx = idx[jumping]
            if jidx.size:
                u = rng.random(jidx.size)
                col = (u[:, None] > table.cum[pos[jidx]]).sum(axis=1)
                killed = col >= table.kill_col
                alive[jidx[killed]] = False
                ok = jidx[~killed]
                pos[ok] = table.nbr[pos[ok], col[~killed]]
    else:  # euler-split
        nsteps = int(np.ceil(t / dt))
        step = t / nsteps
        for _ in range(nsteps):
            act = np.flatnonzero(alive)
            if act.size == 0:
                break
            p = pos[act]
            acc[act] += V[p] * step
            u = rng.random(act.size)
            move = u < np.minimum(table.rate[p] * step, 1.0)
            midx = act[move]
            if midx.size:
                u2 = rng.random(midx.size)
                col = (u2[:, None] > table.cum[pos[midx]]).sum(axis=1)
                killed = col >= table.kill_col
                alive[midx[killed]] = False
                ok = midx[~killed]
                pos[ok] = table.nbr[pos[ok], col[~killed]]

    fin = np.where(alive, f_values[pos], 0.0)
    if log_domain:
        logw = np.where(alive, -acc, -np.inf)
        shift = float(np.max(logw[alive])) if alive.any() else 0.0
        vals = np.where(alive, np.exp(logw - shift) * fin, 0.0)
        return {"shift": shift, "s1": float(vals.sum()), "s2": float((vals ** 2).sum()),
                "w": float(np.where(alive, np.exp(logw - shift), 0.0).sum()),
                "w2": float(np.where(alive, np.exp(2 * (logw - shift)), 0.0).sum()),
                "n": size}
    vals = np.exp(-acc) * fin
    wts = np.where(alive, np.exp(-acc), 0.0)
    return {"shift": 0.0, "s1": float(vals.sum()), "s2": float((vals ** 2).sum()),
            "w": float(wts.sum()), "w2": float((wts ** 2).sum()), "n": size}


def _pairwise(values):
    vals = list(values)
    while len(vals) > 1:
        nxt = [vals[i] + vals[i + 1] for i in range(0, len(vals) - 1, 2)]
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return vals[0]


def _combine(partials):
    shift = max(p["shift"] for p in partials)
    s1 = _pairwise([p["s1"] * np.exp(p["shift"] - shift) for p in partials])
    s2 = _pairwise([p["s2"] * np.exp(2 * (p["shift"] - shift)) for p in partials])
    w = _pairwise([p["w"] * np.exp(p["shift"] - shift) for p in partials])
    w2 = _pairwise([p["w2"] * np.exp(2 * (p["shift"] - shift)) for p in partials])
    n = sum(p["n"] for p in partials)
    return shift, s1, s2, w, w2, n


def mc_feynman_kac(ctx: GeneratorContext, kappa: TamingMeasure | None, f, x0: int,
                   t: float, cfg: WalkerConfig, jobs: int = 1) -> WalkEstimate:
    """Walker estimate of the kappa-weighted semigroup at a single start node."""
    start = time.perf_counter()
    V = node_potential(ctx, kappa if kappa is not None else zero_measure(ctx))
    f = np.asarray(f, dtype=float)
    if cfg.scheme == "euler-split" and cfg.dt > ctx.hmin ** 2:
        raise StepTooLarge(f"dt={cfg.dt} exceeds h^2={ctx.hmin ** 2}")
    table = _jump_table(ctx)
    log_domain = float(np.abs(V).max()) * t > VARIANCE_GUARD
    if log_domain:
        log.warning("large |V| t = %.3g: switching walkers to log-domain weights",
                    float(np.abs(V).max()) * t)

    sizes = [BLOCK] * (cfg.n_walkers // BLOCK)
    if cfg.n_walkers % BLOCK:
        sizes.append(cfg.n_walkers % BLOCK)

    def run_block(b):
        rng = np.random.Generator(np.random.Philox(
            np.random.SeedSequence(entropy=cfg.seed, spawn_key=(b,))))
        return _walk_block(table, V, f, x0, t, sizes[b], rng, cfg.scheme, cfg.dt, log_domain)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            partials = list(pool.map(run_block, range(len(sizes))))
    else:
        partials = [run_block(b) for b in range(len(sizes))]

    shift, s1, s2, w, w2, n = _combine(partials)
    scale = np.exp(shift)
    mean = scale * s1 / n
    var = (scale ** 2) * max(s2 / n - (s1 / n) ** 2, 0.0)
    stderr = float(np.sqrt(var / max(n - 1, 1)))
    ess = (w ** 2) / w2 if w2 > 0 else 0.0
    return WalkEstimate(mean=float(mean), stderr=stderr, n_effective=float(ess),
                        elapsed=time.perf_counter() - start)


def _jump_table(ctx: GeneratorContext) -> _JumpTable:
    key = ("jump", ctx.fingerprint())
    if key not in ctx._caches:
        ctx._caches[key] = _JumpTable(ctx)
    return ctx._caches[key]


def mc_moderateness(ctx: GeneratorContext, kappa, t, start_set, cfg: WalkerConfig,
                    jobs: int = 1):
    """Per-start estimates of the weighted-semigroup mass; returns
    (max estimate, list of (node, WalkEstimate))."""
    if len(start_set) == 0:
        raise ValueError("start_set must be non-empty")
    ones = np.ones(ctx.n)
    per_start = [(int(x0), mc_feynman_kac(ctx, kappa, ones, int(x0), t, cfg, jobs=jobs))
                 for x0 in start_set]
    best = max(per_start, key=lambda kv: kv[1].mean)
    return best[1], per_start


def mc_vs_matrix(ctx: GeneratorContext, kappa, battery, cfg: WalkerConfig,
                 jobs: int = 1, z_limit: float = 3.5, quota: float = 0.99):
    """Cross-validate walker estimates against the matrix semigroup.

    battery: iterable of (name, f, x0, t). Deterministic cases (stderr = 0)
    must match to floating-point roundoff. Verdict passes when at least
    `quota` of the z-scores stay within z_limit.
    """
    rows = []
    zs = []
    for name, f, x0, t in battery:
        est = mc_feynman_kac(ctx, kappa, f, int(x0), float(t), cfg, jobs=jobs)
        exact = float(taming_apply(ctx, kappa, np.asarray(f, dtype=float), float(t))[int(x0)])
        if est.stderr == 0:
            z = 0.0 if abs(est.mean - exact) <= 1e-12 * max(1.0, abs(exact)) else np.inf
        else:
            z = abs(est.mean - exact) / est.stderr
        zs.append(z)
        rows.append((name, float(t), int(x0), float(z_limit - z)))
    frac = float(np.mean([z <= z_limit for z in zs])) if zs else 1.0
    report = finish_report("mc-vs-matrix", {"n_walkers": cfg.n_walkers, "scheme": cfg.scheme,
                                            "z_limit": z_limit, "quota": quota},
                           rows, tolerance=0.0,
                           metadata={"fraction_within": frac, "z_scores": zs})
    if frac < quota:
        report.verdict = "fail"
    else:
        report.verdict = "pass"
    return report
