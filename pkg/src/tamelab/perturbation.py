"""Signed taming measures kappa = k*m + l*sigma and their Feynman-Kac flow.

A measure is stored as a bulk density (w.r.t. the node measure) plus a
boundary density (w.r.t. the lattice surface measure), together with a
positive scale p. The induced node potential is

    V(x) = p * ( k(x) + l(x) * (sigma/m)(x) )

and the weighted semigroup is exp(t (L - V)).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .generator import GeneratorContext
from .semigroup import evolve, evolve_grid

log = logging.getLogger(__name__)

VARIANCE_GUARD = 20.0  # switch walkers to log-domain weights beyond this |V| t


@dataclass(frozen=True)
class TamingMeasure:
    bulk: np.ndarray
    boundary: np.ndarray
    p: float = 1.0

    def __post_init__(self):
        if self.p <= 0:
            raise ValueError("scale p must be positive")
        for a in (self.bulk, self.boundary):
            if not np.all(np.isfinite(a)):
                raise ValueError("measure densities must be finite")

    def scaled(self, factor: float) -> "TamingMeasure":
        return replace(self, p=self.p * factor)

    def __neg__(self) -> "TamingMeasure":
        return replace(self, bulk=-self.bulk, boundary=-self.boundary)

    def label(self) -> str:
        b = float(np.abs(self.bulk).max()) if self.bulk.size else 0.0
        s = float(np.abs(self.boundary).max()) if self.boundary.size else 0.0
        return f"kappa(p={self.p:g},|k|max={b:g},|l|max={s:g})"


def zero_measure(ctx: GeneratorContext) -> TamingMeasure:
    return TamingMeasure(np.zeros(ctx.n), np.zeros(ctx.n))


def bulk_measure(ctx: GeneratorContext, k, p: float = 1.0) -> TamingMeasure:
    k = np.full(ctx.n, float(k)) if np.isscalar(k) else np.asarray(k, dtype=float)
    if k.shape != (ctx.n,):
        raise ValueError("bulk density has wrong length")
    return TamingMeasure(k, np.zeros(ctx.n), p)


def boundary_measure(ctx: GeneratorContext, ell, p: float = 1.0) -> TamingMeasure:
    """ell: scalar, per-free-node array, or callable on boundary coordinates."""
    values = np.zeros(ctx.n)
    bnd = ctx.boundary_free
    if callable(ell):
        values[bnd] = ell(ctx.coords()[bnd])
    elif np.isscalar(ell):
        values[bnd] = float(ell)
    else:
        ell = np.asarray(ell, dtype=float)
        if ell.shape != (ctx.n,):
            raise ValueError("boundary density has wrong length")
        off = np.delete(np.arange(ctx.n), bnd)
        if np.any(ell[off] != 0):
            raise ValueError("boundary density must vanish off the boundary set")
        values = ell
    return TamingMeasure(np.zeros(ctx.n), values, p)


def combine(ctx: GeneratorContext, k=None, ell=None, p: float = 1.0) -> TamingMeasure:
    kb = bulk_measure(ctx, k).bulk if k is not None else np.zeros(ctx.n)
    lb = boundary_measure(ctx, ell).boundary if ell is not None else np.zeros(ctx.n)
    return TamingMeasure(kb, lb, p)


def node_potential(ctx: GeneratorContext, kappa: TamingMeasure | None) -> np.ndarray:
    """Multiplication-operator potential induced by kappa."""
    if kappa is None:
        return np.zeros(ctx.n)
    if kappa.bulk.shape != (ctx.n,) or kappa.boundary.shape != (ctx.n,):
        raise ValueError("measure lives on a different context")
    return kappa.p * (kappa.bulk + kappa.boundary * ctx.sigma_over_m)


def taming_apply(ctx: GeneratorContext, kappa: TamingMeasure | None, f, t,
                 method: str = "auto", steps=None):
    """Feynman-Kac semigroup exp(t (L - V_kappa)) applied to f."""
    V = None if kappa is None else node_potential(ctx, kappa)
    if V is not None and not np.any(V):
        V = None  # exact reduction to the heat flow
    return evolve(ctx, f, t, potential=V, method=method, steps=steps)


def taming_grid(ctx: GeneratorContext, kappa, f, t, num: int):
    V = None if kappa is None else node_potential(ctx, kappa)
    if V is not None and not np.any(V):
        V = None
    return evolve_grid(ctx, f, t, num, potential=V)


def trotter_apply(ctx: GeneratorContext, kappa, f, t, n_steps: int = 1024,
                  method: str = "auto"):
    """Lie splitting (exp(dt L) exp(-dt V))^n f, as an independent cross-check
    of taming_apply."""
    V = node_potential(ctx, kappa)
    dt = t / n_steps
    decay = np.exp(-dt * V)
    g = np.asarray(f, dtype=float).copy()
    for _ in range(n_steps):
        g = evolve(ctx, g, dt, method=method)
        g = decay * g if g.ndim == 1 else decay[:, None] * g
    return g


def moderateness_constant(ctx: GeneratorContext, kappa, t, method: str = "auto") -> float:
    """C_t = max over nodes of the kappa-weighted semigroup applied to 1."""
    if t == 0:
        return 1.0
    u = taming_apply(ctx, kappa, np.ones(ctx.n), t, method=method)
    return float(u.max())


def moderateness_sweep(ctx: GeneratorContext, kappa, t_grid, p_grid) -> np.ndarray:
    """Table C[t_i, p_j] of weighted-semigroup sups for scaled measures.

    t_grid and p_grid must be non-empty; t_grid increasing.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    p_grid = np.asarray(p_grid, dtype=float)
    if t_grid.size == 0 or p_grid.size == 0:
        raise ValueError("sweep grids must be non-empty")
    out = np.empty((t_grid.size, p_grid.size))
    for j, p in enumerate(p_grid):
        kp = kappa.scaled(p) if p != 0 else None
        for i, t in enumerate(t_grid):
            out[i, j] = moderateness_constant(ctx, kp, float(t))
    return out
