"""Command line front end: run configs, query stability limits, list cases."""

from __future__ import annotations

import click

from .cases import CASES
from .config import ParseError, load_config, with_overrides
from .run import Diverged, run_simulation
from .stability import maxwell_alpha_max


@click.group()
def main():
    """Energy-conserving 1d2v particle-in-cell benchmarks."""


@main.command()
@click.argument("config_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None, help="Override the seed from the file.")
@click.option("--deterministic", is_flag=True, help="Force the deterministic flag on.")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV path.")
def run(config_file, seed, deterministic, out):
    """Run the simulation described by CONFIG_FILE and print its summary."""
    try:
        config = load_config(config_file)
        if seed is not None:
            config = with_overrides(config, seed=seed)
        if deterministic:
            config = with_overrides(config, deterministic=True)
        if out is not None:
            config = with_overrides(config, output=out)
    except (ParseError, ValueError) as exc:
        raise click.ClickException(str(exc)) from None
    try:
        summary = run_simulation(config)
    except Diverged as exc:
        click.echo(f"diverged: {exc}", err=True)
        raise SystemExit(3) from None
    click.echo(f"wrote {summary['rows']} rows to {config.output}")
    click.echo(f"max |H - H0|       = {summary['max_energy_error']:.3e}")
    click.echo(f"max Gauss residual = {summary['max_gauss_residual']:.3e}")
    click.echo(f"mean iterations    = {summary['mean_iters']:.2f}")


@main.command()
@click.option("--degree", type=int, default=None, help="Spline degree p; default 1, 2, 3.")
def stability(degree):
    """Print the explicit Maxwell solve limit dt <= alpha_max * dx."""
    degrees = (degree,) if degree is not None else (1, 2, 3)
    for p in degrees:
        if p < 1:
            raise click.ClickException(f"degree must be >= 1, got {p}")
        click.echo(f"p={p}: dt <= {maxwell_alpha_max(p):.7f} * dx")


@main.group()
def cases():
    """Inspect the built-in case library."""


@cases.command("list")
def cases_list():
    """One line of defaults per case."""
    for name in sorted(CASES):
        c = CASES[name]
        n_p = "/".join(str(k) for k in c.n_p)
        click.echo(f"{name:13s} {c.summary}")
        click.echo(
            f"{'':13s} L={c.length:.6g}  n={c.n}  p={c.degree}  "
            f"t_end={c.t_end:g}  n_p={n_p}"
        )


if __name__ == "__main__":
    main()
