"""Acceptance battery: one test per quantitative criterion, each printing a
single PASS/FAIL line. Tolerances are fixed here, not tuned at runtime."""

import time

import numpy as np
import pytest
from scipy.linalg import expm

import tamelab as tl
from tamelab import verifier
from tamelab.generator import inner
from tamelab.grid import cusp_curvature
from tamelab.scenarios import make_scenario, run_scenario


def _verdict(num, name, ok):
    print(f"\nACCEPTANCE {num:02d} {name}: {'PASS' if ok else 'FAIL'}", flush=True)
    assert ok, f"criterion {num} ({name}) failed"


def _method(ctx):
    return "dense-expm" if ctx.n < 2000 else "krylov"


@pytest.fixture(scope="module")
def reference_grids(two_node, interval64, interval64_dirichlet, torus64, strip48):
    return {"two-node": two_node, "interval64": interval64,
            "interval64-dirichlet": interval64_dirichlet,
            "torus64": torus64, "strip48": strip48}


def test_criterion_01_semigroup_laws(reference_grids):
    start = time.perf_counter()
    tol = 1e-9
    ok = True
    for name, ctx in reference_grids.items():
        rng = np.random.default_rng(101)
        method = _method(ctx)
        conservative = not np.any(ctx.leak)
        for _ in range(3):
            f = rng.standard_normal(ctx.n)
            g = rng.standard_normal(ctx.n)
            t, s = rng.uniform(0.02, 0.15, size=2)
            a = tl.heat_apply(ctx, f, t + s, method=method)
            b = tl.heat_apply(ctx, tl.heat_apply(ctx, f, s, method=method), t, method=method)
            ok &= np.abs(a - b).max() <= tol * np.abs(f).max()
            sym = abs(inner(ctx, tl.heat_apply(ctx, f, t, method=method), g)
                      - inner(ctx, f, tl.heat_apply(ctx, g, t, method=method)))
            ok &= sym <= tol * np.sqrt(inner(ctx, f, f) * inner(ctx, g, g))
            fp = np.abs(f)
            ptfp = tl.heat_apply(ctx, fp, t, method=method)
            ok &= ptfp.min() >= -tol * fp.max()
            ok &= ptfp.max() <= fp.max() * (1 + tol)
            if conservative:
                m0 = inner(ctx, fp, np.ones(ctx.n))
                m1 = inner(ctx, ptfp, np.ones(ctx.n))
                ok &= abs(m1 - m0) <= tol * abs(m0)
    elapsed = time.perf_counter() - start
    ok &= elapsed < 60.0
    _verdict(1, f"semigroup laws on 5 grids ({elapsed:.1f}s)", ok)


def test_criterion_02_feynman_kac_identities(reference_grids):
    ok = True
    rng = np.random.default_rng(202)
    # exact reduction at kappa = 0
    for ctx in reference_grids.values():
        f = rng.standard_normal(ctx.n)
        t = 0.17
        m = _method(ctx)
        diff = tl.taming_apply(ctx, tl.zero_measure(ctx), f, t, method=m) \
            - tl.heat_apply(ctx, f, t, method=m)
        ok &= np.abs(diff).max() <= 1e-12
    # constant measure: exponential factor
    for name in ("interval64", "torus64"):
        ctx = reference_grids[name]
        f = rng.standard_normal(ctx.n)
        c, t = 0.7, 0.2
        m = _method(ctx)
        a = tl.taming_apply(ctx, tl.bulk_measure(ctx, c), f, t, method=m)
        b = np.exp(-c * t) * tl.heat_apply(ctx, f, t, method=m)
        ok &= np.abs(a - b).max() <= 1e-10 * np.abs(f).max()
    # Lie splitting cross-check at n = 1024
    for name in ("interval64", "strip48", "torus64"):
        ctx = reference_grids[name]
        m = _method(ctx)
        raw = rng.standard_normal(ctx.n)
        v = tl.heat_apply(ctx, raw, 4 * ctx.hmin ** 2, method=m)
        kappa = tl.bulk_measure(ctx, v / np.abs(v).max())
        f = rng.standard_normal(ctx.n)
        t = 0.1
        exact = tl.taming_apply(ctx, kappa, f, t, method=m)
        split = tl.trotter_apply(ctx, kappa, f, t, n_steps=1024, method=m)
        rel = np.linalg.norm(split - exact) / np.linalg.norm(exact)
        ok &= rel <= 1e-4
    _verdict(2, "Feynman-Kac identities (reduction / factor / splitting)", ok)


def test_criterion_03_holder_jensen(reference_grids):
    ok = True
    counts = {}
    for name, ctx in reference_grids.items():
        rng = np.random.default_rng(303)
        if ctx.n > 2:
            fs = verifier.make_battery(ctx, n_random=19, seed=303)
        else:
            fs = [(f"f{j}", rng.standard_normal(2)) for j in range(25)]
        smooth = tl.heat_apply(ctx, rng.standard_normal(ctx.n), ctx.hmin ** 2)
        kap = tl.bulk_measure(ctx, 0.4 * smooth / np.abs(smooth).max())
        t_list = (0.05, 0.15, 0.4)
        hol = tl.check_holder(ctx, kap, fs, t_list=t_list, q_list=(2, 3))
        jen = tl.check_jensen(ctx, kap, fs, t_list=t_list)
        pow_ = tl.check_power_domination(ctx, kap, fs, t_list=t_list)
        n_cases = len(hol.margins) + len(jen.margins) + len(pow_.margins)
        counts[name] = n_cases
        ok &= n_cases >= 200
        for rep in (hol, jen, pow_):
            ok &= rep.worst_margin >= -1e-10
    _verdict(3, f"Holder/Jensen nodewise slack (cases per grid >= {min(counts.values())})", ok)


def test_criterion_04_khasminskii(interval64, strip_small):
    ok = True
    rng = np.random.default_rng(404)
    checked = 0
    for ctx in (interval64, strip_small):
        for _ in range(10):
            t = rng.uniform(0.1, 0.4)
            v = -np.abs(tl.heat_apply(ctx, rng.standard_normal(ctx.n), ctx.hmin ** 2))
            kappa = tl.bulk_measure(ctx, v)
            rho = tl.kato_profile(ctx, kappa, [t])[0][1]
            target = rng.uniform(0.3, 0.8)
            kappa = kappa.scaled(target / rho)
            rho = tl.kato_profile(ctx, kappa, [t])[0][1]
            ok &= rho <= 0.8 + 1e-9
            ct = tl.moderateness_constant(ctx, kappa, t)
            ok &= ct <= tl.khasminskii_bound(rho) + 1e-8
            checked += 1
    ok &= checked == 20
    _verdict(4, "Khasminskii bound for 20 negative potentials", ok)


def test_criterion_05_ge2_be2_torus(torus64):
    ctx = torus64
    fs = verifier.make_battery(ctx, n_random=44, seed=505)  # + coords/bumps => 50+
    assert len(fs) >= 50
    fs = fs[:50]
    ge = tl.check_ge(ctx, None, p=2, test_fs=fs, t_list=(0.05, 0.2, 1.0))
    phis = []
    rng = np.random.default_rng(505)
    xy = ctx.coords()
    for j in range(6):
        center = xy[rng.integers(0, ctx.n)]
        bump = (np.linalg.norm(xy - center, axis=1) <= 6 * ctx.hmin).astype(float)
        phis.append((f"phi{j}", tl.heat_apply(ctx, bump, ctx.hmin ** 2)))
    be = tl.check_be2(ctx, None, test_fs=fs[:12], test_phis=phis)
    ok = ge.verdict == "pass" and ge.worst_margin >= -1e-8
    ok &= be.worst_margin >= -10 * ge.tolerance
    _verdict(5, f"order-2 gradient/Bochner on 64^2 torus (worst {ge.worst_margin:.2e})", ok)


def test_criterion_06_poincare_logsobolev(torus64, interval64, two_node):
    ok = True
    for ctx in (torus64, interval64):
        fs = verifier.make_battery(ctx, n_random=6, seed=606)
        pos = verifier.make_positive_battery(ctx, n_random=6, seed=606)
        poi = tl.check_poincare(ctx, None, fs, t=0.2)
        los = tl.check_logsobolev(ctx, None, pos, t=0.2)
        ok &= poi.worst_margin >= -1e-8 and los.worst_margin >= -1e-8
    # frozen two-point closed forms (2x2 eigendecomposition oracle)
    t = 0.25
    f = np.array([1.0, 0.0])
    ptf = tl.heat_apply(two_node, f, t)
    mid = (tl.heat_apply(two_node, f * f, t) - ptf ** 2) / (2 * t)
    ok &= np.abs(mid - (1 - np.exp(-4 * t)) / (8 * t)).max() < 1e-10
    g = np.array([2.0, 1.0])
    t2 = 0.2
    w = 0.5 * (1 + np.exp(-2 * t2))
    gap_expect = np.array([
        w * 2 * np.log(2) - (1 + w) * np.log(1 + w),
        (1 - w) * 2 * np.log(2) - (2 - w) * np.log(2 - w)])
    ptg = tl.heat_apply(two_node, g, t2)
    gap = tl.heat_apply(two_node, g * np.log(g), t2) - ptg * np.log(ptg)
    ok &= np.abs(gap - gap_expect).max() < 1e-10
    _verdict(6, "local Poincare / log-Sobolev bounds", ok)


def test_criterion_07_doubling_identity(rng):
    ok = True
    for geom, res, t in (("interval", 64, 0.3), ("disk", 24, 0.2)):
        dom = tl.build_grid(geom, resolution=res)
        dd = tl.build_doubled(dom)
        fs = [(f"f{j}", rng.standard_normal(dd.n_doubled)) for j in range(6)]
        rep = tl.doubled_identity_check(dd, fs, t=t)
        ok &= -rep.worst_margin <= 1e-9
        ok &= rep.metadata["symmetric_reduction_error"] <= 1e-10
        ok &= rep.metadata["antisymmetric_reduction_error"] <= 1e-10
    _verdict(7, "doubled-space semigroup identity (interval + 24^2 disk)", ok)


def test_criterion_08_sub_taming_trend(rng):
    viols = []
    hs = []
    for n in (32, 64):
        dom = tl.build_grid("interval", resolution=n)
        dd = tl.build_doubled(dom)
        fs = []
        for j in range(10):
            g = rng.standard_normal(dd.absorbed.n)
            fs.append((f"f{j}", tl.heat_apply(dd.absorbed, g, dd.absorbed.hmin ** 2)))
        rep = tl.sub_taming_check(dd, None, fs, t=0.2)
        viols.append(max(0.0, -rep.worst_margin))
        hs.append(dd.reflected.hmin)
    ok = viols[0] <= 1.0 * hs[0] and viols[1] <= 1.0 * hs[1]
    ok &= viols[1] <= max(viols[0] / 1.5, 1e-12)
    _verdict(8, f"absorbed-flow domination, refinement trend {viols}", ok)


def test_criterion_09_monte_carlo(path8, strip_small, two_node):
    cfg = tl.WalkerConfig(n_walkers=100_000, seed=909)
    rng = np.random.default_rng(909)
    reports = []
    # deterministic and path-graph cases with a mixed-sign potential
    kap = tl.bulk_measure(path8, 0.4 * rng.standard_normal(path8.n))
    battery = [("const", np.ones(path8.n), 0, 0.25)]
    battery += [(f"p{j}", np.abs(rng.standard_normal(path8.n)),
                 int(rng.integers(0, path8.n)), 0.35) for j in range(5)]
    reports.append(tl.mc_vs_matrix(path8, kap, battery, cfg))
    # two-node with closed-form reference
    kap2 = tl.bulk_measure(two_node, np.array([1.0, 0.0]))
    reports.append(tl.mc_vs_matrix(two_node, kap2,
                                   [("a", np.array([1.0, 0.3]), 0, 0.5),
                                    ("b", np.array([0.2, 1.0]), 1, 0.5)], cfg))
    # boundary measure on the strip: occupation-time weighting
    ell = tl.boundary_measure(strip_small, 0.8)
    fs = verifier.make_battery(strip_small, n_random=2, seed=909)
    battery3 = [(n, np.abs(f), int(rng.integers(0, strip_small.n)), 0.04) for n, f in fs[:3]]
    reports.append(tl.mc_vs_matrix(strip_small, ell, battery3, cfg))
    zs = [z for r in reports for z in r.metadata["z_scores"]]
    frac = np.mean([z <= 3.5 for z in zs])
    ok = frac >= 0.99 and all(r.verdict == "pass" for r in reports)
    # bit-exact reduction across thread counts
    est1 = tl.mc_feynman_kac(path8, kap, np.ones(path8.n), 2, 0.3, cfg, jobs=1)
    est8 = tl.mc_feynman_kac(path8, kap, np.ones(path8.n), 2, 0.3, cfg, jobs=8)
    ok &= (est1.mean == est8.mean) and (est1.stderr == est8.stderr)
    _verdict(9, f"walker oracle ({len(zs)} cases, max z {max(zs):.2f})", ok)


def test_criterion_10_oscillating_sweep(tmp_path):
    spec = make_scenario("oscillating-potential")
    result = run_scenario(spec, out_dir=tmp_path / "osc")
    rep = result.reports[0]
    meta = rep.metadata
    logc = meta["log_constants"]
    ok = all(b >= a - 1e-12 for a, b in zip(logc, logc[1:]))
    lo, hi = meta["band"]
    ok &= meta["crossing"] is not None and lo <= meta["crossing"] <= hi
    ok &= result.passed
    _verdict(10, f"oscillating sweep crossing k={meta['crossing']} in [{lo:.3g},{hi:.3g}]", ok)


def test_criterion_11_cusp_lp_dichotomy():
    ok = True
    for alpha, p, expect_bounded in ((0.5, 3.0, True), (0.9, 3.0, False)):
        dom1 = tl.build_grid("cusp", resolution=32, alpha=alpha)
        dom2 = tl.build_grid("cusp", resolution=64, alpha=alpha)

        def ell(coords, alpha=alpha):
            return cusp_curvature(np.linalg.norm(coords[:, :2], axis=1), alpha)
        _, prediction, details = tl.surface_lp_check(dom1, ell, p, dom2)
        ok &= prediction == expect_bounded
    _verdict(11, "cusp boundary L^p dichotomy", ok)
