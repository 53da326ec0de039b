"""Built-in experiment scenarios, their taming measures, and the batch runner.

Every scenario is a :class:`ScenarioSpec`: geometry, measure construction
(closed-form densities with an explicit truncation where the measure is a
limit object), resolutions for refinement trends, times, checks and a seed.
Running one produces a deterministic report bundle.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import doubling, kato, montecarlo, verifier
from .errors import ConfigParse, UnknownScenario
from .generator import GeneratorContext, build_generator, gamma, inner
from .grid import GridDomain, build_grid, bump_curvature, cusp_curvature, write_pgm
from .perturbation import (TamingMeasure, boundary_measure, bulk_measure, combine,
                           moderateness_constant, node_potential, taming_apply,
                           zero_measure)
from .reports import (FAIL, PASS, REPORT_ONLY, InequalityReport, dump_margins_csv,
                      dump_profile_csv, dump_summary, finish_report)
from .semigroup import heat_apply

TREND_CHECKS = {"ge1", "sub-taming", "gamma-gamma", "self-improvement"}


@dataclass
class ScenarioSpec:
    name: str
    geometry: dict
    kappa: dict
    resolutions: tuple
    t_list: tuple
    checks: tuple
    seed: int = 1
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        res = tuple(self.resolutions)
        if any(b <= a for a, b in zip(res, res[1:])):
            raise ConfigParse("resolutions must be strictly increasing")
        unknown = [c for c in self.checks if c not in CHECK_RUNNERS]
        if unknown:
            raise ConfigParse(f"unknown checks: {unknown}")


@dataclass
class ScenarioResult:
    name: str
    reports: list
    estimates: list
    profiles: dict
    passed: bool
    summary: dict


# ---------------------------------------------------------------------------
# closed-form densities

def oscillating_density(coords, m_exp: float, r0: float, variant: str = "i"):
    """Radially oscillating bulk density with the singularity capped at r0."""
    r = np.maximum(np.linalg.norm(coords, axis=1), r0)
    phase = r ** (-m_exp)
    env = r ** (-2.0 - 2.0 * m_exp)
    s = np.sin(phase)
    if variant == "i":
        return env * (2.0 * np.maximum(s, 0.0) - np.maximum(-s, 0.0))
    if variant == "ii":
        return env * (2.0 * s + 1.0)
    raise ConfigParse(f"unknown oscillating variant {variant!r}")


def _theta_smooth(r, j: int):
    """Monotone C^1 flattening of the radius: constant 2/j near 0, the
    identity on [1/j, 1], constant 2 far out."""
    from scipy.interpolate import PchipInterpolator

    if j < 2:
        raise ConfigParse("truncation level j must be >= 2")
    knots_x = [0.0, 1.0 / (3 * j), 1.0 / j, 1.0, 3.0, 5.0]
    knots_y = [2.0 / j, 2.0 / j, 1.0 / j, 1.0, 2.0, 2.0]
    return PchipInterpolator(knots_x, knots_y)(np.minimum(r, 5.0))


def timechange_weight(coords, j: int, m_exp: float, ell_exp: float, centers, lambdas):
    """Truncated sum of oscillating radial weights; level j controls how close
    to the singular centers the oscillation is kept."""
    psi = np.zeros(coords.shape[0])
    for (c, lam) in zip(centers, lambdas):
        r = np.linalg.norm(coords - np.asarray(c), axis=1)
        rt = _theta_smooth(r, j)
        psi += lam * rt ** (2.0 + 2.0 * m_exp - ell_exp) * np.sin(rt ** (-m_exp))
    return psi


def wiggle_curvature(x, truncation: int, base_scale: float = 0.25):
    """Signed curvature of a truncated sum of shrinking boundary wiggles.

    Wiggle i has half-width base_scale * 2^(1-i), oscillation index 4^i, and
    sits as a +/- pair around the domain midline.
    """
    x = np.asarray(x, dtype=float)
    h1 = np.zeros_like(x)
    h2 = np.zeros_like(x)
    for i in range(1, truncation + 1):
        r = base_scale * 2.0 ** (1 - i)
        ell = 4 ** i
        omega = (2 * ell + 1) * np.pi
        for sign in (+1.0, -1.0):
            u = (x - (1.0 + sign * 2.0 * r)) / r
            on = np.abs(u) <= 1.0
            h1 += sign * np.where(on, -np.sin(omega * u) / (omega * r), 0.0)
            h2 += sign * np.where(on, -np.cos(omega * u) / (r * r), 0.0)
    return h2 / (1.0 + h1 ** 2) ** 1.5


def kappa_from_config(ctx: GeneratorContext, cfg: dict) -> TamingMeasure:
    cfg = dict(cfg or {"kind": "zero"})
    kind = cfg.pop("kind", "zero")
    p = float(cfg.pop("p", 1.0))
    sign = float(cfg.pop("sign", 1.0))
    if kind == "zero":
        return zero_measure(ctx)
    if kind == "constant":
        return bulk_measure(ctx, sign * float(cfg["value"]), p)
    if kind == "boundary-constant":
        return boundary_measure(ctx, sign * float(cfg["value"]), p)
    if kind == "oscillating":
        dens = oscillating_density(ctx.coords() - np.asarray(cfg.get("center", [0.5, 0.5])),
                                   float(cfg.get("m", 1.0)), float(cfg.get("r0", 0.25)),
                                   cfg.get("variant", "i"))
        return bulk_measure(ctx, sign * float(cfg.get("k", 1.0)) * dens, p)
    if kind == "cusp-curvature":
        alpha = float(cfg.get("alpha", getattr(ctx.domain, "params", {}).get("alpha", 0.5)))
        h = ctx.hmin
        from .grid import cusp_profile

        def ell(coords):
            # restrict to nodes near the revolved surface (not the box walls)
            r = np.linalg.norm(coords[:, :2], axis=1)
            near = np.abs(coords[:, 2] - cusp_profile(r, alpha)) <= 1.5 * h
            return np.where(near, cusp_curvature(r, alpha), 0.0)
        return boundary_measure(ctx, lambda c: sign * ell(c), p)
    if kind == "bump-curvature":
        prm = getattr(ctx.domain, "params", {})
        r = float(cfg.get("r", prm.get("r", 0.25)))
        depth = float(cfg.get("depth", prm.get("depth", 0.1)))
        width = float(cfg.get("width", prm.get("width", 1.0)))

        def ell(coords):
            return bump_curvature(coords[:, 0] - 0.5 * width, r, depth)
        return boundary_measure(ctx, lambda c: sign * ell(c), p)
    if kind == "wiggly-curvature":
        trunc = int(cfg.get("truncation", 2))

        def ell(coords):
            # curvature only on the floor of the strip
            floor = coords[:, 1] <= coords[:, 1].min() + 1e-12
            return np.where(floor, wiggle_curvature(coords[:, 0], trunc), 0.0)
        return boundary_measure(ctx, lambda c: sign * ell(c), p)
    if kind == "table":
        bulk = np.zeros(ctx.n)
        bnd = np.zeros(ctx.n)
        for key, target in (("bulk_csv", bulk), ("boundary_csv", bnd)):
            path = cfg.get(key)
            if path:
                with open(path) as fh:
                    for row in csv.reader(fh):
                        if not row or row[0].startswith("#"):
                            continue
                        target[int(row[0])] = float(row[1])
        return TamingMeasure(sign * bulk, sign * bnd, p)
    raise ConfigParse(f"unknown kappa kind {kind!r}")


# ---------------------------------------------------------------------------
# check runners

class RunEnv:
    def __init__(self, spec: ScenarioSpec, resolution: int):
        self.spec = spec
        geom = dict(spec.geometry)
        geom["resolution"] = _scale_resolution(geom.get("resolution"), resolution)
        self.domain = build_grid(**geom)
        psi_cfg = spec.params.get("timechange")
        flat_ctx = build_generator(self.domain)
        if psi_cfg:
            psi = timechange_weight(self.domain.coords(), **psi_cfg)
            self.ctx = build_generator(self.domain, psi=psi)
            self.flat_ctx = flat_ctx
            k_bulk = -(flat_ctx.L @ psi)
            self.kappa = bulk_measure(self.ctx, k_bulk)
        else:
            self.ctx = flat_ctx
            self.flat_ctx = flat_ctx
            self.kappa = kappa_from_config(self.ctx, spec.kappa)
        self.battery = verifier.make_battery(self.ctx, n_random=spec.params.get("n_random", 8),
                                             seed=spec.seed)
        self.positive = verifier.make_positive_battery(self.ctx, seed=spec.seed)


def _scale_resolution(base, resolution):
    if base is None:
        return resolution
    if np.iterable(base):
        scale = resolution / max(base)
        return tuple(max(3, int(round(b * scale))) for b in base)
    return resolution


def _run_ge(env: RunEnv, p: int, report_only: bool):
    return verifier.check_ge(env.ctx, env.kappa, N=env.spec.params.get("N", math.inf),
                             p=p, test_fs=env.battery, t_list=env.spec.t_list,
                             report_only=report_only)


def _ge1(env):
    return _run_ge(env, 1, env.spec.params.get("ge_report_only", False))


def _ge2(env):
    return _run_ge(env, 2, env.spec.params.get("ge_report_only", False))


def _be2(env):
    phis = [(n, np.abs(f)) for n, f in env.positive]
    return verifier.check_be2(env.ctx, env.kappa, N=env.spec.params.get("N", math.inf),
                              test_fs=env.battery, test_phis=phis)


def _holder(env):
    return verifier.check_holder(env.ctx, env.kappa, env.battery, env.spec.t_list)


def _jensen(env):
    return verifier.check_jensen(env.ctx, env.kappa, env.battery, env.spec.t_list)


def _power(env):
    return verifier.check_power_domination(env.ctx, env.kappa, env.battery, env.spec.t_list)


def _poincare(env):
    t = float(np.median(env.spec.t_list))
    return verifier.check_poincare(env.ctx, env.kappa, env.battery, t)


def _logsobolev(env):
    t = float(np.median(env.spec.t_list))
    return verifier.check_logsobolev(env.ctx, env.kappa, env.positive, t)


def _selfimp(env):
    t = float(np.median(env.spec.t_list))
    return verifier.check_selfimprovement(env.ctx, env.kappa, env.battery, t)


def _gamma_gamma(env):
    return verifier.check_gamma_gamma(env.ctx, env.kappa, N=env.spec.params.get("N", math.inf),
                                      test_fs=env.battery)


def _doubling_identity(env):
    dd = doubling.build_doubled(env.domain, env.ctx)
    rng = np.random.default_rng(env.spec.seed)
    fs = [(f"f{j}", rng.standard_normal(dd.n_doubled)) for j in range(6)]
    t = float(np.median(env.spec.t_list))
    return doubling.doubled_identity_check(dd, fs, t)


def _sub_taming(env):
    dd = doubling.build_doubled(env.domain, env.ctx)
    rng = np.random.default_rng(env.spec.seed)
    smooth = env.ctx.hmin ** 2
    fs = []
    for j in range(6):
        g = rng.standard_normal(dd.absorbed.n)
        fs.append((f"f{j}", heat_apply(dd.absorbed, g, smooth)))
    t = float(np.median(env.spec.t_list))
    return doubling.sub_taming_check(dd, env.kappa, fs, t)


def _kato_profile(env):
    t_list = env.spec.params.get("kato_t_list", (0.002, 0.005, 0.01, 0.02, 0.05))
    prof = kato.kato_profile(env.ctx, env.kappa, t_list)
    alphas = env.spec.params.get("kato_alphas", (1.0, 10.0, 100.0))
    pots = [(a, kato.alpha_potential_sup(env.ctx, env.kappa, a)) for a in alphas]
    rows = [(f"rho-monotone", t, -1, r2 - r1)
            for (t, r1), (_, r2) in zip(prof, prof[1:])]
    rows += [("alpha-decreasing", a1, -1, p1 - p2)
             for (a1, p1), (_, p2) in zip(pots, pots[1:])]
    report = finish_report("kato-profile", {"t_list": list(map(float, t_list))}, rows,
                           tolerance=1e-12,
                           metadata={"rho": prof, "alpha_potential": pots,
                                     "rho_small_t": prof[0][1]})
    report.profile_rows = [(t, r, None, None) for t, r in prof] + \
                          [(None, None, a, v) for a, v in pots]
    return report


def _khasminskii(env):
    t = float(min(env.spec.t_list))
    neg = TamingMeasure(np.minimum(node_potential(env.ctx, env.kappa), 0.0),
                        np.zeros(env.ctx.n))
    rho = kato.kato_profile(env.ctx, neg, [t])[0][1]
    rows = []
    meta = {"rho": rho, "t": t}
    if rho < 1.0:
        bound = kato.khasminskii_bound(rho)
        ct = moderateness_constant(env.ctx, neg, t)
        rows.append(("exp-moment", t, -1, bound + 1e-8 - ct))
        meta.update({"bound": bound, "constant": ct})
    else:
        rows.append(("rho-too-large", t, -1, float("nan")))
    return finish_report("khasminskii", {"t": t}, rows, tolerance=0.0, metadata=meta)


def _surface_lp(env):
    pairs = env.spec.params.get("lp_pairs", ((0.5, 3.0), (0.9, 3.0)))
    res = env.spec.resolutions
    rows = []
    meta = {}
    for alpha, p in pairs:
        geom = dict(env.spec.geometry)
        geom["alpha"] = alpha
        geom["resolution"] = res[0]
        dom1 = build_grid(**geom)
        dom2 = None
        if len(res) > 1:
            geom["resolution"] = res[-1]
            dom2 = build_grid(**geom)

        def ell(coords, alpha=alpha):
            return cusp_curvature(np.linalg.norm(coords[:, :2], axis=1), alpha)
        norm, prediction, details = kato.surface_lp_check(dom1, ell, p, dom2)
        expected = alpha * p < 2.0
        rows.append((f"alpha={alpha:g},p={p:g}", 0.0, -1,
                     1.0 if prediction == expected else -1.0))
        meta[f"alpha={alpha:g},p={p:g}"] = details | {"prediction": prediction,
                                                      "expected": expected}
    return finish_report("surface-lp", {"pairs": [list(p) for p in pairs]}, rows,
                         tolerance=0.0, metadata=meta)


def _moderateness_sweep(env):
    prm = env.spec.params
    k_grid = prm.get("k_grid", tuple(0.05 * 2 ** i for i in range(8)))
    threshold = float(prm.get("log_threshold", 1.0))
    m_exp = float(env.spec.kappa.get("m", 1.0))
    band = prm.get("crossing_band")
    t = float(prm.get("sweep_t", 1.0))
    logc = []
    for k in k_grid:
        cfg = dict(env.spec.kappa)
        cfg["k"] = k
        kap = kappa_from_config(env.ctx, cfg)
        logc.append(math.log(moderateness_constant(env.ctx, kap, t)))
    rows = [("monotone", float(k2), -1, c2 - c1)
            for (k1, c1), (k2, c2) in zip(zip(k_grid, logc), list(zip(k_grid, logc))[1:])]
    crossing = next((float(k) for k, c in zip(k_grid, logc) if c > threshold), None)
    meta = {"k_grid": list(map(float, k_grid)), "log_constants": logc,
            "threshold": threshold, "crossing": crossing, "t": t}
    if band is not None:
        lo, hi = band
        ok = crossing is not None and lo <= crossing <= hi
        rows.append(("crossing-in-band", 0.0, -1, 1.0 if ok else -1.0))
        meta["band"] = [lo, hi]
    return finish_report("moderateness-sweep", {"m": m_exp}, rows, tolerance=1e-12,
                         metadata=meta)


def _mc_vs_matrix(env):
    cfg = montecarlo.WalkerConfig(n_walkers=env.spec.params.get("n_walkers", 20000),
                                  seed=env.spec.seed)
    rng = np.random.default_rng(env.spec.seed)
    battery = []
    for j, (name, f) in enumerate(env.battery[:4]):
        x0 = int(rng.integers(0, env.ctx.n))
        battery.append((name, np.abs(f), x0, float(min(env.spec.t_list))))
    return montecarlo.mc_vs_matrix(env.ctx, env.kappa, battery, cfg,
                                   jobs=env.spec.params.get("jobs", 1))


def _semigroup_laws(env):
    ctx = env.ctx
    rng = np.random.default_rng(env.spec.seed)
    rows = []
    conservative = not np.any(ctx.leak)
    for j in range(4):
        f = rng.standard_normal(ctx.n)
        g = rng.standard_normal(ctx.n)
        t, s = rng.uniform(0.01, 0.2, size=2)
        method = "dense-expm" if ctx.n < 2000 else "krylov"
        pts = heat_apply(ctx, f, t + s, method=method)
        ptps = heat_apply(ctx, heat_apply(ctx, f, s, method=method), t, method=method)
        err = np.abs(pts - ptps).max() / max(np.abs(f).max(), 1e-300)
        rows.append((f"law{j}", float(t + s), -1, -float(err)))
        sym = abs(inner(ctx, heat_apply(ctx, f, t, method=method), g)
                  - inner(ctx, f, heat_apply(ctx, g, t, method=method)))
        scale = math.sqrt(inner(ctx, f, f) * inner(ctx, g, g))
        rows.append((f"sym{j}", float(t), -1, -float(sym / scale)))
        fp = np.abs(f)
        rows.append((f"pos{j}", float(t), -1,
                     float(heat_apply(ctx, fp, t, method=method).min() / max(fp.max(), 1e-300))))
        if conservative:
            mass0 = inner(ctx, fp, np.ones(ctx.n))
            mass1 = inner(ctx, heat_apply(ctx, fp, t, method=method), np.ones(ctx.n))
            rows.append((f"mass{j}", float(t), -1, -abs(mass1 - mass0) / abs(mass0)))
    return finish_report("semigroup-laws", {"conservative": conservative}, rows,
                         tolerance=1e-9, metadata={})


CHECK_RUNNERS = {
    "ge1": _ge1,
    "ge2": _ge2,
    "be2": _be2,
    "holder": _holder,
    "jensen": _jensen,
    "power-domination": _power,
    "poincare": _poincare,
    "logsobolev": _logsobolev,
    "self-improvement": _selfimp,
    "gamma-gamma": _gamma_gamma,
    "doubling-identity": _doubling_identity,
    "sub-taming": _sub_taming,
    "kato-profile": _kato_profile,
    "khasminskii": _khasminskii,
    "surface-lp": _surface_lp,
    "moderateness-sweep": _moderateness_sweep,
    "mc-vs-matrix": _mc_vs_matrix,
    "semigroup-laws": _semigroup_laws,
}


# ---------------------------------------------------------------------------
# built-in scenarios

def _torus_flat(**kw):
    return ScenarioSpec(
        name="torus-flat", geometry={"geometry": "torus", "resolution": (64, 64)},
        kappa={"kind": "zero"}, resolutions=(kw.get("resolution", 64),),
        t_list=(0.05, 0.2, 1.0),
        checks=("semigroup-laws", "ge2", "be2", "poincare", "logsobolev",
                "holder", "jensen", "power-domination", "self-improvement",
                "gamma-gamma"),
        seed=kw.get("seed", 1), params={"n_random": kw.get("n_random", 8)})


def _oscillating(**kw):
    variant = kw.get("variant", "i")
    m_exp = float(kw.get("m", 1.0))
    band = (m_exp ** 2 / 8.0 * 0.5, 9.0 * m_exp ** 2 / 4.0 * 1.5)
    return ScenarioSpec(
        name="oscillating-potential",
        geometry={"geometry": "box", "resolution": (96, 96), "extent": (2.0, 2.0)},
        kappa={"kind": "oscillating", "m": m_exp, "r0": kw.get("r0", 0.25),
               "variant": variant, "center": [1.0, 1.0], "sign": -1.0,
               "k": kw.get("k", 0.2)},
        resolutions=(kw.get("resolution", 96),), t_list=(1.0,),
        checks=("moderateness-sweep",), seed=kw.get("seed", 1),
        params={"k_grid": kw.get("k_grid", (0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2)),
                "log_threshold": 1.0, "crossing_band": band, "sweep_t": 1.0,
                "truncation_radius": kw.get("r0", 0.25)})


def _nowhere_kato(**kw):
    j = int(kw.get("truncation", 4))
    return ScenarioSpec(
        name="nowhere-kato-timechange",
        geometry={"geometry": "box", "resolution": (96, 96), "extent": (3.0, 3.0)},
        kappa={"kind": "zero"},  # measure is derived from the weight
        resolutions=(kw.get("resolution", 96),), t_list=(0.02, 0.1),
        checks=("kato-profile", "ge1", "ge2", "gamma-gamma"),
        seed=kw.get("seed", 1),
        params={"timechange": {"j": j, "m_exp": 1.0, "ell_exp": 2.0,
                               "centers": [[1.3, 1.6], [1.8, 1.35], [1.45, 1.2]],
                               "lambdas": [0.5, 0.3, 0.2]},
                "ge_report_only": True, "n_random": 6,
                "kato_t_list": (0.001, 0.002, 0.004, 0.008, 0.016)})


def _cusp(**kw):
    return ScenarioSpec(
        name="cusp-domain",
        geometry={"geometry": "cusp", "alpha": float(kw.get("alpha", 0.5))},
        kappa={"kind": "cusp-curvature"},
        resolutions=(kw.get("resolution", 32), 2 * kw.get("resolution", 32)),
        t_list=(0.02,),
        checks=("surface-lp", "kato-profile", "ge1", "ge2"),
        seed=kw.get("seed", 1),
        params={"ge_report_only": True, "n_random": 4,
                "lp_pairs": ((0.5, 3.0), (0.9, 3.0)),
                "kato_t_list": (0.001, 0.002, 0.004, 0.008)})


def _halfspace_bumps(**kw):
    return ScenarioSpec(
        name="halfspace-bumps",
        geometry={"geometry": "bumped-halfplane", "r": kw.get("r", 0.25),
                  "depth": kw.get("depth", 0.1)},
        kappa={"kind": "bump-curvature"},
        resolutions=(kw.get("resolution", 96),), t_list=(0.02, 0.1),
        checks=("kato-profile", "khasminskii", "holder", "jensen", "ge1", "ge2"),
        seed=kw.get("seed", 1),
        params={"ge_report_only": True, "n_random": 6,
                "kato_t_list": (0.001, 0.002, 0.004, 0.008, 0.016)})


def _wiggly(**kw):
    return ScenarioSpec(
        name="wiggly-boundary-2d",
        geometry={"geometry": "halfplane-strip", "resolution": (256, 64),
                  "width": 2.0, "height": 0.5},
        kappa={"kind": "wiggly-curvature", "truncation": int(kw.get("truncation", 2))},
        resolutions=(kw.get("resolution", 256),), t_list=(0.02,),
        checks=("kato-profile", "ge2", "gamma-gamma"),
        seed=kw.get("seed", 1),
        params={"ge_report_only": True, "n_random": 6,
                "kato_t_list": (0.0005, 0.001, 0.002, 0.004)})


def _doubled_interval(**kw):
    return ScenarioSpec(
        name="doubled-interval",
        geometry={"geometry": "interval", "resolution": (64,)},
        kappa=kw.get("kappa", {"kind": "zero"}),
        resolutions=(kw.get("resolution", 64), 2 * kw.get("resolution", 64)),
        t_list=(0.1, 0.3), checks=("doubling-identity", "sub-taming"),
        seed=kw.get("seed", 1), params={})


def _doubled_disk(**kw):
    return ScenarioSpec(
        name="doubled-disk",
        geometry={"geometry": "disk", "resolution": (24,)},
        kappa=kw.get("kappa", {"kind": "zero"}),
        resolutions=(kw.get("resolution", 24),), t_list=(0.05, 0.2),
        checks=("doubling-identity",), seed=kw.get("seed", 1), params={})


SCENARIOS = {
    "torus-flat": _torus_flat,
    "oscillating-potential": _oscillating,
    "nowhere-kato-timechange": _nowhere_kato,
    "cusp-domain": _cusp,
    "halfspace-bumps": _halfspace_bumps,
    "wiggly-boundary-2d": _wiggly,
    "doubled-interval": _doubled_interval,
    "doubled-disk": _doubled_disk,
}


def make_scenario(name: str, **overrides) -> ScenarioSpec:
    if name not in SCENARIOS:
        raise UnknownScenario(f"{name!r}; known: {sorted(SCENARIOS)}")
    return SCENARIOS[name](**overrides)


# ---------------------------------------------------------------------------
# runner

def run_scenario(spec: ScenarioSpec, out_dir=None, jobs: int = 1,
                 dump_margins: bool = False, plots: bool = False) -> ScenarioResult:
    from concurrent.futures import ThreadPoolExecutor
    from pathlib import Path

    env = RunEnv(spec, spec.resolutions[0])
    env.spec.params["jobs"] = jobs

    def run_one(check):
        report = CHECK_RUNNERS[check](env)
        if check in TREND_CHECKS and len(spec.resolutions) > 1:
            fine = RunEnv(spec, spec.resolutions[-1])
            fine_report = CHECK_RUNNERS[check](fine)
            report.refinement_trend = (report.worst_margin, fine_report.worst_margin)
            report.metadata["refinement_resolutions"] = list(spec.resolutions)
        return report

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(run_one, spec.checks))
    else:
        reports = [run_one(c) for c in spec.checks]
    reports.sort(key=lambda r: r.check_name)

    passed = all(r.verdict != FAIL for r in reports)
    summary = {
        "schema": "tamelab-report/1",
        "scenario": spec.name,
        "seed": spec.seed,
        "resolutions": list(spec.resolutions),
        "geometry": spec.geometry,
        "kappa": spec.kappa,
        "t_list": list(map(float, spec.t_list)),
        "params": {k: v for k, v in spec.params.items() if k != "jobs"},
        "checks": [r.to_dict() for r in reports],
        "passed": passed,
    }
    profiles = {r.check_name: r.profile_rows for r in reports if hasattr(r, "profile_rows")}

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        dump_summary(out / "summary.json", summary)
        _write_meta(out / "meta.json")
        for name, rows in profiles.items():
            dump_profile_csv(out / f"profile_{name}.csv", rows)
        if dump_margins:
            for r in reports:
                dump_margins_csv(out / f"margins_{r.check_name}.csv", r)
        write_pgm(env.domain, out / "mask.pgm")
        if plots:
            _plot_reports(out, reports)
    return ScenarioResult(name=spec.name, reports=reports, estimates=[],
                          profiles=profiles, passed=passed, summary=summary)


def _write_meta(path):
    import json
    import platform
    import time

    with open(path, "w") as fh:
        json.dump({"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
                   "python": platform.python_version()}, fh, indent=2)
        fh.write("\n")


def _plot_reports(out_dir, reports):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    for r in reports:
        if not r.margins:
            continue
        fig, ax = plt.subplots(figsize=(5, 3))
        ax.hist([row[3] for row in r.margins if np.isfinite(row[3])], bins=40)
        ax.set_title(f"{r.check_name}: margin distribution")
        ax.set_xlabel("margin")
        fig.tight_layout()
        fig.savefig(f"{out_dir}/plot_{r.check_name}.svg")
        plt.close(fig)
