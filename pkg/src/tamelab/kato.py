"""Kato/Dynkin-class diagnostics for potentials and boundary measures."""

from __future__ import annotations

import numpy as np

from .errors import RhoOutOfRange
from .generator import GeneratorContext
from .grid import GridDomain
from .perturbation import TamingMeasure, node_potential
from .semigroup import evolve_grid, resolvent_apply

SIMPSON_RTOL = 1e-6
SIMPSON_MAX_POINTS = 4097  # 2**12 + 1


def _simpson(values: np.ndarray, dt: float) -> np.ndarray:
    """Composite Simpson along axis 0 (odd number of uniformly spaced rows)."""
    n = values.shape[0]
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return np.tensordot(w, values, axes=(0, 0)) * (dt / 3.0)


def semigroup_time_integral(ctx: GeneratorContext, v, t: float,
                            rtol: float = SIMPSON_RTOL, potential=None) -> np.ndarray:
    """Nodewise integral of exp(s (L - V)) v over s in [0, t], by composite
    Simpson with interval halving."""
    if t == 0:
        return np.zeros_like(np.asarray(v, dtype=float))
    npts = 17
    prev = None
    while True:
        vals = evolve_grid(ctx, v, t, npts, potential=potential)
        integral = _simpson(vals, t / (npts - 1))
        if prev is not None:
            scale = max(float(np.abs(integral).max()), 1e-300)
            if float(np.abs(integral - prev).max()) <= rtol * scale:
                return integral
        if npts >= SIMPSON_MAX_POINTS:
            return integral
        prev = integral
        npts = 2 * npts - 1


def kato_profile(ctx: GeneratorContext, mu: TamingMeasure, t_list):
    """rho(t) = max over nodes of int_0^t P_s |V_mu| ds for each requested t.

    Returns a list of (t, rho) pairs; rho is nondecreasing in t. The first
    entry doubles as the small-time classifier statistic.
    """
    t_list = [float(t) for t in t_list]
    if any(b <= a for a, b in zip(t_list, t_list[1:])) or any(t <= 0 for t in t_list):
        raise ValueError("t_list must be positive and increasing")
    vabs = np.abs(node_potential(ctx, mu))
    out = []
    for t in t_list:
        integral = semigroup_time_integral(ctx, vabs, t)
        out.append((t, float(integral.max())))
    return out


def alpha_potential_sup(ctx: GeneratorContext, mu: TamingMeasure, alpha: float) -> float:
    """max over nodes of the alpha-resolvent applied to |V_mu|."""
    vabs = np.abs(node_potential(ctx, mu))
    return float(resolvent_apply(ctx, vabs, alpha).max())


def khasminskii_bound(rho: float) -> float:
    """Exponential-moment bound 1 / (1 - rho), valid for 0 <= rho < 1."""
    if not 0.0 <= rho < 1.0:
        raise RhoOutOfRange(f"rho = {rho} outside [0, 1)")
    return 1.0 / (1.0 - rho)


# pass band for the two-resolution ratio test: the bounded branch drifts by a
# mesh correction only, the unbounded branch grows by a fixed mesh-power
RATIO_BOUNDED = 1.084


def boundary_lp_norm(domain: GridDomain, ell, p: float) -> float:
    """Discrete L^p norm of a boundary density against the surface measure."""
    coords = domain.coords()[domain.boundary_set]
    if callable(ell):
        values = np.asarray(ell(coords), dtype=float)
    else:
        values = np.asarray(ell, dtype=float)
        if values.shape[0] == domain.n_active:
            values = values[domain.boundary_set]
    area = domain.exposed_faces[domain.boundary_set] * domain.node_mass
    return float(np.sum(np.abs(values) ** p * area) ** (1.0 / p))


def surface_lp_check(domain: GridDomain, ell, p: float,
                     refined_domain: GridDomain | None = None):
    """L^p(sigma) norm of a boundary density and a Kato-class prediction.

    The prediction combines the exponent condition p > dim - 1 with a
    boundedness trend: when a refined domain is supplied, the norm ratio
    between the two resolutions must stay below RATIO_BOUNDED.

    Returns (lp_norm, prediction, details).
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    norm = boundary_lp_norm(domain, ell, p)
    details = {"p": p, "dim": domain.dim, "norm": norm}
    exponent_ok = p > domain.dim - 1
    if refined_domain is None:
        prediction = bool(exponent_ok and np.isfinite(norm))
        return norm, prediction, details
    norm2 = boundary_lp_norm(refined_domain, ell, p)
    ratio = norm2 / norm if norm > 0 else np.inf
    details.update({"norm_refined": norm2, "ratio": ratio, "ratio_bound": RATIO_BOUNDED})
    prediction = bool(exponent_ok and ratio <= RATIO_BOUNDED)
    return norm, prediction, details
