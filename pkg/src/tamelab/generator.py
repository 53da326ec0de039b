"""Node measures, edge weights, the graph generator L and the carré du champ.

Functions live on the *free* nodes: active nodes minus the Dirichlet-tagged
ones. An edge from a free node to a Dirichlet node is removed from the
difference stencil but its weight stays in the diagonal ("leakage"), so the
generator is sub-Markovian exactly where absorption happens.

The discrete objects satisfy, exactly:

    (L f)(x)      = (1/m_x) [ sum_y w_xy (f(y) - f(x)) - leak_x f(x) ]
    Gamma(f,g)(x) = (1/(2 m_x)) [ sum_y w_xy (f(y)-f(x))(g(y)-g(x))
                                  + leak_x f(x) g(x) ]
    L(fg) - f Lg - g Lf = 2 Gamma(f,g)
    E(f,g) = (1/2) sum_x m_x Gamma(f,g)(x)
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import NonPositiveWeight
from .grid import BC_DIRICHLET, BC_NEUMANN, GridDomain, _edge_axes


@dataclass
class GeneratorContext:
    domain: GridDomain | None
    m: np.ndarray                 # node measure on free nodes
    W: sp.csr_matrix              # symmetric weight matrix, free x free
    leak: np.ndarray              # weight mass leaking to absorbed neighbors
    L: sp.csr_matrix
    sigma_over_m: np.ndarray      # boundary surface density / node mass
    free_ids: np.ndarray | None   # free-node index into the domain's active order
    hmin: float = 1.0
    psi: np.ndarray | None = None
    weight_mode: str = "none"
    wdeg: np.ndarray = field(default=None, repr=False)
    _caches: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.m.size

    @property
    def boundary_free(self) -> np.ndarray:
        """Free-node indices carrying surface measure (Neumann boundary)."""
        return np.flatnonzero(self.sigma_over_m > 0)

    def coords(self) -> np.ndarray:
        if self.domain is None:
            raise ValueError("context has no lattice geometry")
        return self.domain.coords()[self.free_ids]

    def operator(self, potential=None) -> sp.csr_matrix:
        """Sparse L - diag(V)."""
        if potential is None:
            return self.L
        return (self.L - sp.diags(np.asarray(potential, dtype=float))).tocsr()

    def fingerprint(self, potential=None) -> str:
        h = hashlib.sha1()
        h.update(self.W.data.tobytes())
        h.update(self.m.tobytes())
        h.update(self.leak.tobytes())
        if potential is not None:
            h.update(np.asarray(potential, dtype=float).tobytes())
        return h.hexdigest()[:16]


def _edge_arrays(domain: GridDomain):
    i, j = domain.neighbor_table()
    axes = _edge_axes(domain)
    return i, j, axes


def build_generator(domain: GridDomain, psi=None, mode: str = "time-change") -> GeneratorContext:
    """Assemble measure, weights and generator for a lattice domain.

    psi, if given, reweights the flat structure: ``time-change`` scales the
    node measure by exp(2 psi) and keeps edge weights; ``drift`` scales both
    measure and edge weights by exp(2 psi) (edges take the geometric mean of
    their endpoint factors).
    """
    n_act = domain.n_active
    mass = domain.node_mass
    m_act = np.full(n_act, mass)

    i, j, axes = _edge_arrays(domain)
    w = np.array([mass / domain.spacing[a] ** 2 for a in axes]) if axes.size else np.zeros(0)

    if psi is not None:
        psi = np.asarray(psi, dtype=float)
        if psi.shape != (n_act,):
            raise ValueError("psi must be given on active nodes")
        if not np.all(np.isfinite(psi)):
            raise ValueError("psi must be finite")
        scale = np.exp(2.0 * psi)
        m_act = m_act * scale
        if mode == "drift":
            w = w * np.exp(psi[i] + psi[j])
        elif mode != "time-change":
            raise ValueError(f"unknown weight mode {mode!r}")

    if np.any(w <= 0) or np.any(m_act <= 0):
        raise NonPositiveWeight("weights and masses must be positive")

    free_mask = domain.bc != BC_DIRICHLET
    free_ids = np.flatnonzero(free_mask)
    act_to_free = np.full(n_act, -1, dtype=np.int64)
    act_to_free[free_ids] = np.arange(free_ids.size)
    nf = free_ids.size

    keep = free_mask[i] & free_mask[j]
    fi, fj, fw = act_to_free[i[keep]], act_to_free[j[keep]], w[keep]
    W = sp.csr_matrix((np.concatenate([fw, fw]),
                       (np.concatenate([fi, fj]), np.concatenate([fj, fi]))),
                      shape=(nf, nf))

    leak = np.zeros(nf)
    lost = free_mask[i] ^ free_mask[j]
    li = np.where(free_mask[i[lost]], i[lost], j[lost])
    np.add.at(leak, act_to_free[li], w[lost])

    m = m_act[free_ids]
    wdeg = np.asarray(W.sum(axis=1)).ravel()
    L = (W - sp.diags(wdeg + leak)).multiply(1.0 / m[:, None]).tocsr()

    # flat-lattice face-area / cell-mass ratio; boundary taming measures are
    # only combined with unweighted contexts
    sigma_over_m = np.zeros(nf)
    neumann = domain.bc[free_ids] == BC_NEUMANN
    sigma_over_m[neumann] = domain.exposed_faces[free_ids][neumann]

    return GeneratorContext(domain=domain, m=m, W=W, leak=leak, L=L,
                            sigma_over_m=sigma_over_m, free_ids=free_ids,
                            hmin=float(min(domain.spacing)),
                            psi=None if psi is None else psi[free_ids],
                            weight_mode="none" if psi is None else mode,
                            wdeg=wdeg)


def graph_context(weights, masses) -> GeneratorContext:
    """Context for an explicit small weighted graph (no lattice geometry)."""
    W = sp.csr_matrix(np.asarray(weights, dtype=float))
    m = np.asarray(masses, dtype=float)
    if np.any(m <= 0) or np.any(W.data <= 0):
        raise NonPositiveWeight("weights and masses must be positive")
    wdeg = np.asarray(W.sum(axis=1)).ravel()
    L = (W - sp.diags(wdeg)).multiply(1.0 / m[:, None]).tocsr()
    return GeneratorContext(domain=None, m=m, W=W, leak=np.zeros(m.size), L=L,
                            sigma_over_m=np.zeros(m.size), free_ids=None,
                            hmin=1.0, wdeg=wdeg)


def two_node_context(w: float = 1.0, masses=(1.0, 1.0)) -> GeneratorContext:
    return graph_context([[0.0, w], [w, 0.0]], masses)


def validate_function(ctx: GeneratorContext, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape[0] != ctx.n:
        raise ValueError(f"function has length {f.shape[0]}, expected {ctx.n}")
    if not np.all(np.isfinite(f)):
        raise ValueError("function values must be finite")
    return f


def _coo_edges(ctx: GeneratorContext):
    key = "coo"
    if key not in ctx._caches:
        coo = ctx.W.tocoo()
        ctx._caches[key] = (coo.row.copy(), coo.col.copy(), coo.data.copy())
    return ctx._caches[key]


def gamma(ctx: GeneratorContext, f, g=None) -> np.ndarray:
    """Carré du champ Gamma(f, g) on free nodes. Accepts (n,) or (n, k).

    Edge differences are formed before multiplying, so constants give an
    exact zero and near-constants carry no cancellation noise.
    """
    f = np.asarray(f, dtype=float)
    g = f if g is None else np.asarray(g, dtype=float)
    row, col, w = _coo_edges(ctx)
    if f.ndim == 1:
        contrib = w * (f[col] - f[row]) * (g[col] - g[row])
        out = np.bincount(row, weights=contrib, minlength=ctx.n)
        out += ctx.leak * f * g
        return out / (2.0 * ctx.m)
    out = np.empty_like(f)
    for j in range(f.shape[1]):
        contrib = w * (f[col, j] - f[row, j]) * (g[col, j] - g[row, j])
        out[:, j] = np.bincount(row, weights=contrib, minlength=ctx.n)
    out += ctx.leak[:, None] * f * g
    return out / (2.0 * ctx.m[:, None])


def energy(ctx: GeneratorContext, f) -> float:
    """Dirichlet energy E(f) = (1/2) sum_x m_x Gamma(f)(x)."""
    return float(0.5 * np.dot(ctx.m, gamma(ctx, f)))


def energy_perturbed(ctx: GeneratorContext, f, kappa) -> float:
    """E(f) plus the zero-order term  sum f^2 dkappa  (bulk and surface)."""
    from .perturbation import node_potential

    f = np.asarray(f, dtype=float)
    return energy(ctx, f) + float(np.dot(ctx.m, f * f * node_potential(ctx, kappa)))


def inner(ctx: GeneratorContext, f, g) -> float:
    """m-weighted inner product."""
    return float(np.dot(ctx.m * np.asarray(f), np.asarray(g)))
