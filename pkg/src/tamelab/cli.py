"""Command-line front end: run scenarios, list them, or drive single checks."""

from __future__ import annotations

import sys

import click
import numpy as np

from . import __version__
from .errors import ConfigParse, TamelabError, UnknownScenario
from .scenarios import (SCENARIOS, ScenarioSpec, kappa_from_config, make_scenario,
                        run_scenario)


def _load_config(path):
    if path is None:
        return {}
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except Exception as exc:
        raise ConfigParse(f"cannot parse {path}: {exc}") from exc


def _spec_from_config(scenario, cfg, resolution, seed) -> ScenarioSpec:
    overrides = dict(cfg.get("scenario", {}))
    if resolution is not None:
        overrides["resolution"] = resolution
    if seed is not None:
        overrides["seed"] = seed
    spec = make_scenario(scenario, **overrides)
    run_cfg = cfg.get("run", {})
    if "t_list" in run_cfg:
        spec.t_list = tuple(float(t) for t in run_cfg["t_list"])
    if "checks" in run_cfg:
        spec = ScenarioSpec(name=spec.name, geometry=spec.geometry, kappa=spec.kappa,
                            resolutions=spec.resolutions, t_list=spec.t_list,
                            checks=tuple(run_cfg["checks"]), seed=spec.seed,
                            params=spec.params)
    if "kappa" in cfg:
        spec.kappa = dict(cfg["kappa"])
    if "domain" in cfg:
        geom = dict(cfg["domain"])
        spec.geometry = geom
        if "resolution" in geom and resolution is None:
            spec.resolutions = (max(np.atleast_1d(geom["resolution"]).tolist()),)
    return spec


@click.group()
@click.version_option(__version__)
def main():
    """Discrete Dirichlet-space laboratory."""


@main.command("list")
def list_scenarios():
    """List the built-in scenarios."""
    for name in sorted(SCENARIOS):
        spec = SCENARIOS[name]()
        click.echo(f"{name:26s} checks: {', '.join(spec.checks)}")


@main.command()
@click.argument("scenario")
@click.option("--config", type=click.Path(exists=True), default=None,
              help="TOML configuration overriding geometry / kappa / run keys.")
@click.option("--resolution", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--jobs", type=int, default=1)
@click.option("--dump-margins", is_flag=True, default=False)
@click.option("--plots", is_flag=True, default=False)
@click.option("--out", type=click.Path(), default="tamelab-out")
def run(scenario, config, resolution, seed, jobs, dump_margins, plots, out):
    """Run a named scenario and write its report bundle.

    Exits zero exactly when every non-report-only check passes.
    """
    try:
        cfg = _load_config(config)
        spec = _spec_from_config(scenario, cfg, resolution, seed)
        result = run_scenario(spec, out_dir=out, jobs=jobs,
                              dump_margins=dump_margins, plots=plots)
    except (UnknownScenario, ConfigParse) as exc:
        raise click.ClickException(str(exc)) from exc
    except TamelabError as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}") from exc
    for r in result.reports:
        click.echo(f"{r.check_name:22s} {r.verdict:12s} worst margin {r.worst_margin:+.3e}")
    click.echo(f"bundle written to {out}")
    sys.exit(0 if result.passed else 1)


def _direct(scenario_name, config, resolution, seed, jobs, out, checks):
    cfg = _load_config(config)
    spec = _spec_from_config(scenario_name, cfg, resolution, seed)
    if "run" not in cfg or "checks" not in cfg.get("run", {}):
        spec = ScenarioSpec(name=spec.name, geometry=spec.geometry, kappa=spec.kappa,
                            resolutions=spec.resolutions, t_list=spec.t_list,
                            checks=checks, seed=spec.seed, params=spec.params)
    result = run_scenario(spec, out_dir=out, jobs=jobs)
    for r in result.reports:
        click.echo(f"{r.check_name:22s} {r.verdict:12s} worst margin {r.worst_margin:+.3e}")
    sys.exit(0 if result.passed else 1)


@main.command("verify-ge")
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--resolution", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--jobs", type=int, default=1)
@click.option("--out", type=click.Path(), default="tamelab-out")
def verify_ge(config, resolution, seed, jobs, out):
    """Gradient-estimate battery (orders 1 and 2 plus Bochner form)."""
    _direct("torus-flat", config, resolution, seed, jobs, out, ("ge1", "ge2", "be2"))


@main.command("kato-scan")
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--resolution", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--jobs", type=int, default=1)
@click.option("--out", type=click.Path(), default="tamelab-out")
def kato_scan(config, resolution, seed, jobs, out):
    """Small-time Kato profile and resolvent classifier for a measure."""
    _direct("halfspace-bumps", config, resolution, seed, jobs, out,
            ("kato-profile", "khasminskii"))


@main.command("doubling-check")
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--resolution", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--jobs", type=int, default=1)
@click.option("--out", type=click.Path(), default="tamelab-out")
def doubling_check(config, resolution, seed, jobs, out):
    """Glued-space identity and absorbed-flow domination."""
    _direct("doubled-interval", config, resolution, seed, jobs, out,
            ("doubling-identity", "sub-taming"))
