"""``delaylab`` command line."""
from __future__ import annotations

import logging
import sys

import click

from .errors import DelaylabError
from .harness import (ENGINES, bundled_scenarios, emit_report, load_scenario, run_experiment)
from .mac import MacParams, aggregate_capacity, solve_fixed_point

FORMATS = click.Choice(["text", "csv"])


def _load(spec_path, omega2):
    try:
        spec = load_scenario(spec_path)
        if omega2:
            spec = spec.with_omega2_mode(omega2)
    except DelaylabError as exc:
        raise click.ClickException(f"invalid scenario: {exc}") from None
    return spec


def _run(spec, fmt, ci, backend, out):
    try:
        table = run_experiment(spec, backend=backend)
    except DelaylabError as exc:
        raise click.ClickException(str(exc)) from None
    text = emit_report(table, fmt, ci=ci)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def _sim_options(fn):
    fn = click.option("--replications", "-r", type=int, default=None, help="Replications per row.")(fn)
    fn = click.option("--seed", "-s", type=int, default=None,
                      help="Base seed (default: file, then $DELAYLAB_SEED, then 1).")(fn)
    fn = click.option("--packets", type=int, default=None,
                      help="Measured-packet budget per row, summed over replications.")(fn)
    fn = click.option("--horizon", type=float, default=None,
                      help="Simulated seconds per replication (overrides --packets).")(fn)
    fn = click.option("--engine", "engines", multiple=True, type=click.Choice(["dcf", "rps"]),
                      help="Simulation engine(s); default from the file, else dcf.")(fn)
    fn = click.option("--workers", type=int, default=None, help="Processes for replications.")(fn)
    fn = click.option("--backend", type=click.Choice(["cython", "python"]), default=None,
                      help="Force a kernel implementation.")(fn)
    return fn


def _common(fn):
    fn = click.option("--format", "fmt", type=FORMATS, default="text", show_default=True)(fn)
    fn = click.option("--omega2", type=click.Choice(["literal", "mean_square"]), default=None,
                      help="Second-moment convention for the analytic column.")(fn)
    fn = click.option("--ci", is_flag=True, help="Append CI half-width columns to CSV output.")(fn)
    fn = click.option("--out", "-o", type=click.Path(dir_okay=False), default=None)(fn)
    fn = click.argument("spec")(fn)
    return fn


def _apply_sim_overrides(spec, replications, seed, packets, horizon, engines, workers, analytic):
    changes = {}
    if replications is not None:
        changes["replications"] = replications
    if seed is not None:
        changes["seed"] = seed
    if packets is not None:
        changes["packet_budget"] = packets
    if horizon is not None:
        changes["horizon"] = horizon
    if workers is not None:
        changes["workers"] = workers
    sims = tuple(engines) or tuple(e for e in spec.run.engines if e != "analytic") or ("dcf",)
    changes["engines"] = (("analytic",) if analytic else ()) + sims
    try:
        return spec.with_run(**changes)
    except DelaylabError as exc:
        raise click.ClickException(str(exc)) from None


@click.group()
@click.option("-v", "--verbose", count=True)
def main(verbose):
    """Mean application-packet delay in single-cell 802.11 DCF WLANs."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@_common
def analytic(spec, fmt, omega2, ci, out):
    """Closed-form delays only (deterministic, no simulation)."""
    s = _load(spec, omega2)
    _run(s.with_run(engines=("analytic",)), fmt, ci, None, out)


@main.command()
@_common
@_sim_options
def simulate(spec, fmt, omega2, ci, out, replications, seed, packets, horizon, engines,
             workers, backend):
    """Simulated delays only."""
    s = _apply_sim_overrides(_load(spec, omega2), replications, seed, packets, horizon,
                             engines, workers, analytic=False)
    _run(s, fmt, ci, backend, out)


@main.command()
@_common
@_sim_options
def compare(spec, fmt, omega2, ci, out, replications, seed, packets, horizon, engines,
            workers, backend):
    """Analytic column next to simulated per-node delays."""
    s = _apply_sim_overrides(_load(spec, omega2), replications, seed, packets, horizon,
                             engines, workers, analytic=True)
    _run(s, fmt, ci, backend, out)


@main.command()
@click.option("--nodes", "-n", type=int, required=True, help="Number of contending nodes.")
@click.option("--packet-bytes", type=float, default=1500.0, show_default=True)
@click.option("--simulate", "do_sim", is_flag=True, help="Also run a saturated DCF simulation.")
@click.option("--horizon", type=float, default=200.0, show_default=True,
              help="Simulated seconds for --simulate.")
@click.option("--seed", type=int, default=0)
@click.option("--format", "fmt", type=FORMATS, default="text", show_default=True)
def capacity(nodes, packet_bytes, do_sim, horizon, seed, fmt):
    """Saturated channel capacity from the fixed-point model."""
    if nodes < 1:
        raise click.ClickException("--nodes must be >= 1")
    mac = MacParams()
    fp = solve_fixed_point(mac, nodes)
    cap = aggregate_capacity(mac, nodes, 8.0 * packet_bytes)
    sim = None
    if do_sim:
        from .sim import estimate_capacity
        sim = estimate_capacity(nodes, mac, seed=seed, mtu_bytes=packet_bytes, horizon=horizon)
    if fmt == "csv":
        cols = ["nodes", "beta", "p", "pkts_per_s", "bits_per_s"] + (["sim_pkts_per_s"] if sim else [])
        vals = [nodes, f"{fp.beta:.10g}", f"{fp.p:.10g}", f"{cap.pkts_per_s:.6g}", f"{cap.bits_per_s:.6g}"]
        if sim:
            vals.append(f"{sim.pkts_per_s:.6g}")
        click.echo(",".join(cols))
        click.echo(",".join(str(v) for v in vals))
        return
    click.echo(f"nodes            {nodes}")
    click.echo(f"attempt prob     {fp.beta:.6f}")
    click.echo(f"collision prob   {fp.p:.6f}")
    click.echo(f"slots (s/i/c)    {cap.slots.p_s:.4f} / {cap.slots.p_i:.4f} / {cap.slots.p_c:.4f}")
    click.echo(f"capacity         {cap.pkts_per_s:.2f} pkts/s  ({cap.bits_per_s / 1e3:.1f} kb/s)")
    if sim:
        click.echo(f"simulated        {sim.pkts_per_s:.2f} pkts/s  over {sim.elapsed:.0f} s")


@main.command("list")
def list_scenarios():
    """Bundled scenario files."""
    for name in bundled_scenarios():
        click.echo(name)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
