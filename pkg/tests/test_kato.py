import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import tamelab as tl
from tamelab.grid import cusp_curvature


def test_profile_zero_measure(interval64):
    prof = tl.kato_profile(interval64, tl.zero_measure(interval64), [0.1, 0.2])
    assert all(r == 0.0 for _, r in prof)


def test_profile_constant_bulk_is_linear(interval64):
    c = 0.8
    prof = tl.kato_profile(interval64, tl.bulk_measure(interval64, c), [0.1, 0.25, 0.5])
    for t, rho in prof:
        assert rho == pytest.approx(c * t, abs=1e-8)


def test_profile_monotone_and_input_validation(strip_small):
    kappa = tl.boundary_measure(strip_small, 1.0)
    prof = tl.kato_profile(strip_small, kappa, [0.01, 0.02, 0.05])
    rhos = [r for _, r in prof]
    assert rhos == sorted(rhos)
    with pytest.raises(ValueError):
        tl.kato_profile(strip_small, kappa, [0.2, 0.1])


def test_boundary_occupation_sqrt_scaling():
    # rho(t) ~ C sqrt(t) for a flat boundary measure: rho(t/4)/rho(t) ~ 1/2
    dom = tl.build_grid("halfplane-strip", resolution=(64, 48), width=1.0, height=0.75)
    ctx = tl.build_generator(dom)
    xy = ctx.coords()
    floor = np.isclose(xy[:, 1], xy[:, 1].min())
    ell = np.where(floor, 1.0, 0.0)
    kappa = tl.boundary_measure(ctx, ell)
    t = 0.016  # diffusive window: well above h^2, well below the mixing time
    prof = dict(tl.kato_profile(ctx, kappa, [t / 4, t]))
    ratio = prof[t / 4] / prof[t]
    assert 0.45 <= ratio <= 0.55


def test_alpha_potential_zero_and_constant(interval64):
    assert tl.alpha_potential_sup(interval64, tl.zero_measure(interval64), 1.0) == 0.0
    c = 0.6
    for alpha in (1.0, 5.0):
        assert tl.alpha_potential_sup(interval64, tl.bulk_measure(interval64, c), alpha) \
            == pytest.approx(c / alpha, rel=1e-10)


def test_alpha_potential_decreasing_on_cusp_boundary():
    dom = tl.build_grid("cusp", resolution=16, alpha=0.5)
    ctx = tl.build_generator(dom)

    def ell(coords):
        return cusp_curvature(np.linalg.norm(coords[:, :2], axis=1), 0.5)
    kappa = tl.boundary_measure(ctx, ell)
    values = [tl.alpha_potential_sup(ctx, kappa, a) for a in (1.0, 10.0, 100.0)]
    assert values[0] > values[1] > values[2]


def test_classifier_equivalence_small_rho(interval64):
    # alpha * K_alpha stays bounded and K_alpha -> 0 along alpha = 10^k
    kappa = tl.bulk_measure(interval64, 0.5)
    vals = [tl.alpha_potential_sup(interval64, kappa, 10.0 ** k) for k in range(4)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-3
    assert max(10.0 ** k * v for k, v in enumerate(vals)) <= 0.5 + 1e-9


def test_khasminskii_values():
    assert tl.khasminskii_bound(0.0) == 1.0
    assert tl.khasminskii_bound(0.5) == 2.0
    assert tl.khasminskii_bound(0.9) == pytest.approx(10.0)
    for bad in (1.0, 1.5, -0.1):
        with pytest.raises(tl.RhoOutOfRange):
            tl.khasminskii_bound(bad)


@given(st.floats(min_value=0.0, max_value=0.99))
@settings(max_examples=50, deadline=None)
def test_khasminskii_dominates_geometric_series(rho):
    # 1/(1-rho) equals sum rho^n, and bounds any partial sum
    partial = sum(rho ** n for n in range(30))
    assert tl.khasminskii_bound(rho) >= partial - 1e-12


def test_khasminskii_consistency_with_semigroup(interval64, rng):
    ctx = interval64
    for _ in range(5):
        v = -np.abs(tl.heat_apply(ctx, rng.standard_normal(ctx.n), ctx.hmin ** 2))
        kappa = tl.bulk_measure(ctx, v)
        t = 0.3
        rho = tl.kato_profile(ctx, kappa, [t])[0][1]
        kappa = kappa.scaled(min(1.0, 0.7 / rho))  # keep rho below 1
        rho = tl.kato_profile(ctx, kappa, [t])[0][1]
        assert tl.moderateness_constant(ctx, kappa, t) \
            <= tl.khasminskii_bound(rho) + 1e-8


def test_surface_lp_bounded_density():
    dom1 = tl.build_grid("box", resolution=(12, 12))
    dom2 = tl.build_grid("box", resolution=(24, 24))
    norm, pred, details = tl.surface_lp_check(dom1, lambda c: np.ones(len(c)), 2.0, dom2)
    assert pred is True
    assert norm == pytest.approx(2.0, rel=0.05)  # perimeter 4, then the 1/p power


def test_surface_lp_exponent_gate():
    dom = tl.build_grid("cusp", resolution=16)
    _, pred, _ = tl.surface_lp_check(dom, lambda c: np.ones(len(c)), 1.5)
    assert pred is False  # p <= dim - 1 fails regardless of the norm


def test_surface_lp_rejects_small_p():
    dom = tl.build_grid("box", resolution=(6, 6))
    with pytest.raises(ValueError):
        tl.surface_lp_check(dom, lambda c: np.ones(len(c)), 0.5)


def test_surface_lp_cusp_dichotomy():
    geom = dict(geometry="cusp", resolution=32)
    results = {}
    for alpha in (0.5, 0.9):
        dom1 = tl.build_grid(**geom, alpha=alpha)
        dom2 = tl.build_grid(geometry="cusp", resolution=64, alpha=alpha)

        def ell(coords, alpha=alpha):
            return cusp_curvature(np.linalg.norm(coords[:, :2], axis=1), alpha)
        _, pred, details = tl.surface_lp_check(dom1, ell, 3.0, dom2)
        results[alpha] = (pred, details["ratio"])
    assert results[0.5][0] is True      # alpha p = 1.5 < 2: bounded
    assert results[0.9][0] is False     # alpha p = 2.7 > 2: norm grows
    assert results[0.9][1] > results[0.5][1]
