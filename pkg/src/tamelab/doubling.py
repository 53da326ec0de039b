"""Gluing two copies of a reflecting domain along its boundary.

The doubled graph carries half the node mass on each copy; a seam node
appears once and keeps its single-copy mass, which makes the evolution of
copy-symmetric functions agree *exactly* with the reflected semigroup and the
evolution of antisymmetric functions agree with the absorbed one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import NoBoundary
from .generator import GeneratorContext, gamma
from .grid import BC_NEUMANN, GridDomain
from .perturbation import TamingMeasure, node_potential, taming_apply, zero_measure
from .reports import finish_report
from .semigroup import heat_apply
from .verifier import TOL_EXACT, _chop, chain_rule_tolerance


@dataclass
class DoubledDomain:
    base: GridDomain
    reflected: GeneratorContext       # Neumann flow on the base domain
    absorbed: GeneratorContext        # killed at the boundary set
    doubled: GeneratorContext         # glued graph
    plus_copy: np.ndarray             # base free index -> doubled index
    minus_copy: np.ndarray
    seam: np.ndarray                  # doubled indices of seam nodes
    involution: np.ndarray            # doubled index permutation swapping copies
    inner_ids: np.ndarray             # base free indices that are not seam

    @property
    def n_doubled(self) -> int:
        return self.doubled.n

    def lift(self, f_plus, f_minus):
        """Assemble a doubled function from its two copy restrictions
        (which must agree on the seam)."""
        f_plus = np.asarray(f_plus, dtype=float)
        f_minus = np.asarray(f_minus, dtype=float)
        out = np.empty(self.n_doubled)
        out[self.plus_copy] = f_plus
        out[self.minus_copy] = f_minus
        seam_base = np.flatnonzero(self.plus_copy == self.minus_copy)
        out[self.plus_copy[seam_base]] = 0.5 * (f_plus[seam_base] + f_minus[seam_base])
        return out

    def lift_symmetric(self, h):
        return self.lift(h, h)

    def lift_antisymmetric(self, g_inner):
        """Antisymmetric lift of a function on the absorbed (inner) nodes."""
        g = np.zeros(self.reflected.n)
        g[self.inner_ids] = np.asarray(g_inner, dtype=float)
        return self.lift(g, -g)

    def restrict(self, f, sign=+1):
        """Copy restriction of a doubled function to the base free nodes."""
        f = np.asarray(f, dtype=float)
        return f[self.plus_copy] if sign > 0 else f[self.minus_copy]

    def lift_measure(self, kappa: TamingMeasure) -> TamingMeasure:
        """Push a taming measure on the reflected space to the doubled graph
        through the node potential (copies share the base value)."""
        v = node_potential(self.reflected, kappa)
        bulk = np.empty(self.n_doubled)
        bulk[self.plus_copy] = v
        bulk[self.minus_copy] = v
        return TamingMeasure(bulk, np.zeros(self.n_doubled), 1.0)


def build_doubled(domain: GridDomain, reflected: GeneratorContext | None = None) -> DoubledDomain:
    """Glue two copies of an all-Neumann domain along its boundary set."""
    if domain.boundary_set.size == 0:
        raise NoBoundary("doubling needs a nonempty boundary set")
    if np.any(domain.bc[domain.boundary_set] != BC_NEUMANN):
        raise ValueError("doubling is defined for reflecting boundaries only")
    from .generator import build_generator

    refl = reflected if reflected is not None else build_generator(domain)
    nb = refl.n
    seam_base = domain.boundary_set            # free ordering == active ordering here
    is_seam = np.zeros(nb, dtype=bool)
    is_seam[seam_base] = True
    inner_ids = np.flatnonzero(~is_seam)

    # absorbed flow: kill at the seam
    bc = domain.bc.copy()
    bc[seam_base] = 2  # Dirichlet
    killed = GridDomain(shape=domain.shape, spacing=domain.spacing, origin=domain.origin,
                        periodic=domain.periodic, active_mask=domain.active_mask,
                        geometry_tag=domain.geometry_tag + "+killed")
    from .grid import _finalize
    killed = _finalize(killed, bc)
    absorbed = build_generator(killed)

    n_inner = inner_ids.size
    n_hat = 2 * n_inner + seam_base.size
    plus_copy = np.empty(nb, dtype=np.int64)
    minus_copy = np.empty(nb, dtype=np.int64)
    plus_copy[inner_ids] = np.arange(n_inner)
    minus_copy[inner_ids] = n_inner + np.arange(n_inner)
    seam_hat = 2 * n_inner + np.arange(seam_base.size)
    plus_copy[seam_base] = seam_hat
    minus_copy[seam_base] = seam_hat

    m_hat = np.empty(n_hat)
    m_hat[plus_copy[inner_ids]] = refl.m[inner_ids] / 2.0
    m_hat[minus_copy[inner_ids]] = refl.m[inner_ids] / 2.0
    m_hat[seam_hat] = refl.m[seam_base]

    Wc = sp.triu(refl.W, k=1).tocoo()
    ri, rj, rw = Wc.row, Wc.col, Wc.data
    hi, hj, hw = [], [], []
    both_seam = is_seam[ri] & is_seam[rj]
    neither = ~is_seam[ri] & ~is_seam[rj]
    mixed = ~(both_seam | neither)
    # inner-inner edges: one per copy at half weight
    for copy in (plus_copy, minus_copy):
        hi.append(copy[ri[neither]]); hj.append(copy[rj[neither]]); hw.append(rw[neither] / 2.0)
    # seam-seam edges: single edge at full weight
    hi.append(plus_copy[ri[both_seam]]); hj.append(plus_copy[rj[both_seam]]); hw.append(rw[both_seam])
    # mixed edges: seam node connects to both copies at half weight
    si = np.where(is_seam[ri[mixed]], ri[mixed], rj[mixed])
    ui = np.where(is_seam[ri[mixed]], rj[mixed], ri[mixed])
    for copy in (plus_copy, minus_copy):
        hi.append(plus_copy[si]); hj.append(copy[ui]); hw.append(rw[mixed] / 2.0)
    hi = np.concatenate(hi); hj = np.concatenate(hj); hw = np.concatenate(hw)
    W_hat = sp.csr_matrix((np.concatenate([hw, hw]),
                           (np.concatenate([hi, hj]), np.concatenate([hj, hi]))),
                          shape=(n_hat, n_hat))
    wdeg = np.asarray(W_hat.sum(axis=1)).ravel()
    L_hat = (W_hat - sp.diags(wdeg)).multiply(1.0 / m_hat[:, None]).tocsr()
    doubled = GeneratorContext(domain=None, m=m_hat, W=W_hat, leak=np.zeros(n_hat),
                               L=L_hat, sigma_over_m=np.zeros(n_hat), free_ids=None,
                               hmin=refl.hmin, wdeg=wdeg)

    involution = np.empty(n_hat, dtype=np.int64)
    involution[plus_copy[inner_ids]] = minus_copy[inner_ids]
    involution[minus_copy[inner_ids]] = plus_copy[inner_ids]
    involution[seam_hat] = seam_hat

    return DoubledDomain(base=domain, reflected=refl, absorbed=absorbed,
                         doubled=doubled, plus_copy=plus_copy, minus_copy=minus_copy,
                         seam=seam_hat, involution=involution, inner_ids=inner_ids)


def doubled_identity_check(dd: DoubledDomain, test_fs, t: float,
                           tolerance: float = 1e-9, method: str = "dense-expm"):
    """Glued-flow identity: the doubled semigroup equals reflected flow of the
    symmetric part plus (signed) absorbed flow of the antisymmetric part."""
    t = float(t)
    rows = []
    sym_err = antisym_err = 0.0
    for k, f in enumerate(test_fs):
        name, vec = f if isinstance(f, tuple) else (f"f{k}", f)
        vec = np.asarray(vec, dtype=float)
        hat = heat_apply(dd.doubled, vec, t, method=method)
        fp = dd.restrict(vec, +1)
        fm = dd.restrict(vec, -1)
        s = 0.5 * (fp + fm)
        a = 0.5 * (fp - fm)
        refl = heat_apply(dd.reflected, s, t, method=method)
        absb = heat_apply(dd.absorbed, a[dd.inner_ids], t, method=method)
        a_full = np.zeros(dd.reflected.n)
        a_full[dd.inner_ids] = absb
        err = max(np.abs(dd.restrict(hat, +1) - (refl + a_full)).max(),
                  np.abs(dd.restrict(hat, -1) - (refl - a_full)).max())
        rows.append((name, t, int(np.argmax(np.abs(dd.restrict(hat, +1) - (refl + a_full)))),
                     -float(err)))
        # pure symmetric / antisymmetric reductions
        sym = dd.lift_symmetric(s)
        sym_err = max(sym_err, float(np.abs(
            dd.restrict(heat_apply(dd.doubled, sym, t, method=method), +1) - refl).max()))
        anti = dd.lift_antisymmetric(a[dd.inner_ids])
        anti_hat = heat_apply(dd.doubled, anti, t, method=method)
        antisym_err = max(antisym_err, float(np.abs(
            dd.restrict(anti_hat, +1)[dd.inner_ids] - absb).max()))
        antisym_err = max(antisym_err, float(np.abs(anti_hat[dd.seam]).max()))
    report = finish_report("doubling-identity", {"t": t}, rows, tolerance,
                           metadata={"symmetric_reduction_error": sym_err,
                                     "antisymmetric_reduction_error": antisym_err})
    return report


def sub_taming_check(domain_or_dd, kappa: TamingMeasure | None, test_fs, t: float,
                     tolerance: float | None = None, method: str = "dense-expm"):
    """Gradient domination of the absorbed flow by the reflected weighted flow:

        Gamma(P0_t f)^(1/2) <= Pbar^{kappa/2}_t Gamma(f)^(1/2)

    for f vanishing on the boundary. Chain-rule tolerance policy applies.
    """
    dd = domain_or_dd if isinstance(domain_or_dd, DoubledDomain) else build_doubled(domain_or_dd)
    refl, absb = dd.reflected, dd.absorbed
    kappa = kappa if kappa is not None else zero_measure(refl)
    if tolerance is None:
        tolerance = chain_rule_tolerance(refl)
    t = float(t)
    half = kappa.scaled(0.5)
    rows = []
    for k, f in enumerate(test_fs):
        name, vec = f if isinstance(f, tuple) else (f"f{k}", f)
        g_inner = np.asarray(vec, dtype=float)
        if g_inner.shape[0] == refl.n:
            g_inner = g_inner[dd.inner_ids]
        full = np.zeros(refl.n)
        full[dd.inner_ids] = g_inner
        rhs = taming_apply(refl, half, np.sqrt(_chop(gamma(refl, full))), t,
                           method=method)
        evolved = np.zeros(refl.n)
        evolved[dd.inner_ids] = heat_apply(absb, g_inner, t, method=method)
        lhs = np.sqrt(_chop(gamma(refl, evolved)))
        margin = rhs - lhs
        node = int(np.argmin(margin))
        rows.append((name, t, node, float(margin[node])))
    return finish_report("sub-taming", {"t": t}, rows, tolerance,
                         metadata={"kappa": kappa.label(), "h": refl.hmin,
                                   "tolerance_policy": "C*h"})
