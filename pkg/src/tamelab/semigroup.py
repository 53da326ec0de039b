"""Heat semigroup, resolvent, conservativeness defect and spectral bottom."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import IterationDivergence, NegativeTime, SingularSystem, SolverDivergence
from .generator import GeneratorContext, inner

DENSE_NODE_LIMIT = 2000      # always eigendecompose below this
SPECTRAL_NODE_LIMIT = 4200   # eigendecompose up to here for batched/repeated use
CACHE_BYTE_BUDGET = 6e8
CN_STEP_CAP = 100_000


class _SymmetricPropagator:
    """Exact propagator for L - V via eigendecomposition of the m-symmetrized
    matrix. Affordable below a few thousand nodes; any t is then cheap."""

    def __init__(self, ctx: GeneratorContext, potential=None):
        A = ctx.operator(potential).toarray()
        s = np.sqrt(ctx.m)
        S = (A * s[:, None]) / s[None, :]
        S = 0.5 * (S + S.T)
        self.vals, Q = np.linalg.eigh(S)
        self.Q = Q
        self.s = s

    def apply(self, f, t):
        f = np.asarray(f, dtype=float)
        if f.ndim == 1:
            g = self.Q.T @ (self.s * f)
            return (self.Q @ (np.exp(t * self.vals) * g)) / self.s
        g = self.Q.T @ (self.s[:, None] * f)
        return (self.Q @ (np.exp(t * self.vals)[:, None] * g)) / self.s[:, None]


def _propagator(ctx: GeneratorContext, potential=None) -> _SymmetricPropagator:
    key = ("prop", ctx.fingerprint(potential))
    cache = ctx._caches
    if key not in cache:
        capacity = max(2, int(CACHE_BYTE_BUDGET / (8 * ctx.n * ctx.n)))
        held = [k for k in cache if isinstance(k, tuple) and k[0] == "prop"]
        if len(held) >= capacity:
            for k in held:
                del cache[k]
        cache[key] = _SymmetricPropagator(ctx, potential)
    return cache[key]


def _pick_method(ctx: GeneratorContext, potential, f, method: str) -> str:
    if method != "auto":
        return method
    if ctx.n < DENSE_NODE_LIMIT:
        return "dense-expm"
    if ctx.n <= SPECTRAL_NODE_LIMIT:
        cached = ("prop", ctx.fingerprint(potential)) in ctx._caches
        batched = f.ndim == 2 and f.shape[1] >= 8
        if cached or batched:
            return "dense-expm"
    return "krylov"


def _crank_nicolson(A: sp.csr_matrix, f, t, steps):
    n = A.shape[0]
    dt = t / steps
    eye = sp.identity(n, format="csc")
    lhs = spla.splu((eye - 0.5 * dt * A).tocsc())
    rhs = (eye + 0.5 * dt * A).tocsr()
    u = np.asarray(f, dtype=float).copy()
    for k in range(steps):
        u = lhs.solve(rhs @ u)
        if k % 256 == 0 and not np.all(np.isfinite(u)):
            raise SolverDivergence("crank-nicolson produced non-finite values")
    if not np.all(np.isfinite(u)):
        raise SolverDivergence("crank-nicolson produced non-finite values")
    return u


def evolve(ctx: GeneratorContext, f, t, potential=None, method: str = "auto",
           steps: int | None = None):
    """Apply exp(t (L - V)) to f. Accepts (n,) or (n, k) input."""
    if t < 0:
        raise NegativeTime(f"t = {t}")
    f = np.asarray(f, dtype=float)
    if t == 0:
        return f.copy()
    # dense spectral propagator while an eigendecomposition is affordable (or
    # already cached), Krylov-style exponential action beyond; crank-nicolson
    # only on request
    method = _pick_method(ctx, potential, f, method)
    if method == "dense-expm":
        return _propagator(ctx, potential).apply(f, t)
    if method == "krylov":
        A = ctx.operator(potential)
        out = spla.expm_multiply(A, f, start=0.0, stop=float(t), num=2, endpoint=True)[-1]
        return out
    if method == "crank-nicolson":
        if steps is None:
            steps = min(CN_STEP_CAP, max(1, int(np.ceil(t / (ctx.hmin ** 2 / 2)))))
        return _crank_nicolson(ctx.operator(potential), f, t, steps)
    raise ValueError(f"unknown method {method!r}")


def evolve_grid(ctx: GeneratorContext, f, t, num: int, potential=None):
    """exp(s (L - V)) f on the uniform grid s = linspace(0, t, num).

    Returns an array of shape (num,) + f.shape.
    """
    if t < 0:
        raise NegativeTime(f"t = {t}")
    f = np.asarray(f, dtype=float)
    if t == 0:
        return np.repeat(f[None], num, axis=0)
    use_dense = _pick_method(ctx, potential, f, "auto") == "dense-expm"
    if not use_dense and num >= 8 and ctx.n <= SPECTRAL_NODE_LIMIT:
        use_dense = True  # many time points amortize one eigendecomposition
    if use_dense:
        prop = _propagator(ctx, potential)
        return np.stack([prop.apply(f, s) for s in np.linspace(0.0, t, num)])
    A = ctx.operator(potential)
    return spla.expm_multiply(A, f, start=0.0, stop=float(t), num=num, endpoint=True)


def heat_apply(ctx: GeneratorContext, f, t, method: str = "auto", steps=None):
    """Heat semigroup exp(tL) f."""
    return evolve(ctx, f, t, potential=None, method=method, steps=steps)


def resolvent_apply(ctx: GeneratorContext, f, alpha: float):
    """Solve (alpha - L) u = f for alpha > 0."""
    if alpha <= 0:
        raise SingularSystem(f"resolvent needs alpha > 0, got {alpha}")
    f = np.asarray(f, dtype=float)
    A = (alpha * sp.identity(ctx.n, format="csr") - ctx.L).tocsc()
    key = ("rlu", float(alpha))
    cache = ctx._caches
    if key not in cache:
        if len(cache) > 16:
            cache.clear()
        cache[key] = spla.splu(A)
    return cache[key].solve(f)


def conservativeness_defect(ctx: GeneratorContext, t: float, method: str = "auto") -> float:
    """max over nodes of 1 - P_t 1; zero on conservative (all-Neumann) grids."""
    if t <= 0:
        raise NegativeTime("defect needs t > 0")
    pt1 = heat_apply(ctx, np.ones(ctx.n), t, method=method)
    return float(np.max(1.0 - pt1))


def lambda0(ctx: GeneratorContext, kappa=None, tol: float = 1e-8,
            max_iter: int = 200, return_info: bool = False):
    """Bottom eigenvalue of -(L - V) in the m-weighted inner product.

    Shifted inverse iteration with Rayleigh-quotient updates; the residual
    criterion is ||(A - lambda) v||_m <= tol ||v||_m. With return_info the
    spectral gap and a near-degeneracy flag are also returned.
    """
    from .perturbation import node_potential

    V = None if kappa is None else node_potential(ctx, kappa)
    A = (-(ctx.L) if V is None else (-(ctx.L) + sp.diags(V))).tocsr()
    n = ctx.n

    diag = A.diagonal()
    offsum = np.asarray(abs(A).sum(axis=1)).ravel() - np.abs(diag)
    lower = float(np.min(diag - offsum))

    def m_norm(v):
        return float(np.sqrt(inner(ctx, v, v)))

    def iterate(v0, deflate=None):
        shift = lower - max(1e-6, 1e-6 * max(1.0, abs(lower)))
        v = v0 / m_norm(v0)
        lam = float(inner(ctx, A @ v, v))
        lu = spla.splu((A - shift * sp.identity(n)).tocsc())
        for it in range(max_iter):
            w = lu.solve(v)
            if deflate is not None:
                w = w - deflate * inner(ctx, w, deflate)
            nw = m_norm(w)
            if not np.isfinite(nw) or nw == 0:
                raise IterationDivergence("inverse iteration broke down")
            v = w / nw
            lam_new = float(inner(ctx, A @ v, v))
            res = m_norm(A @ v - lam_new * v)
            if res <= tol:
                return lam_new, v, res
            # refresh the shift once the quotient has settled
            if it >= 4 and abs(lam_new - lam) < 1e-3 * max(1.0, abs(lam_new)):
                shift = lam_new - max(1e-9, res)
                lu = spla.splu((A - shift * sp.identity(n)).tocsc())
            lam = lam_new
        raise IterationDivergence(f"no convergence after {max_iter} iterations (residual {res:.2e})")

    rng = np.random.default_rng(0)
    v0 = np.ones(n) + 1e-8 * rng.standard_normal(n)
    lam, v, res = iterate(v0)
    if not return_info:
        return lam
    info = {"residual": res, "eigenvector": v}
    if n > 1:
        w0 = rng.standard_normal(n)
        w0 -= v * inner(ctx, w0, v)
        try:
            lam2, _, _ = iterate(w0, deflate=v)
            gap = abs(lam2 - lam)
            info["gap"] = gap
            info["degenerate"] = bool(gap < 1e-10)
        except IterationDivergence:
            info["gap"] = None
            info["degenerate"] = False
    return lam, info
