# app/cli.py
"""
Command line entry point.

    python -m app.cli analyze-rc case.json [--out wave.csv]
    python -m app.cli analyze-rlc pair.json [--twa] [--ccprime-printed | --ccprime VARIANT]
    python -m app.cli simulate case.json [--out wave.csv]
    python -m app.cli validate --kind rc --seed 7 --count 100
    python -m app.cli sweep --param zeta [--grid 0.25,0.5,1] [--out sweep.csv]

stdout carries only the requested artifact (JSON report or CSV); logs go to
stderr. Exit status: 0 ok, 1 input error, 2 numerical failure.
"""
from __future__ import annotations

import io
import json
import sys
from typing import Any, Dict, List, Optional

import click
from pydantic import ValidationError

from app.core.config import CCPRIME_VARIANTS
from app.core.errors import InputError, NumericalError
from app.core.logging import app_logger as logger
from app.core.units import boundary_to_si
from app.schemas.config_schema import AnalysisConfig
from app.services import analysis_service, ladder_sim, sweep_report

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERICAL = 2


def _load(path: str) -> AnalysisConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise InputError(f"cannot read config {path}: {e}") from e
    return analysis_service.parse_config(text)


def _emit_json(payload: Dict[str, Any]) -> None:
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


def _echo_csv(write, data) -> None:
    buf = io.StringIO()
    write(buf, data)
    click.echo(buf.getvalue(), nl=False)


sim_options = [
    click.option("--dt", "dt_ps", type=float, default=None, help="Time step override (ps)."),
    click.option("--tstop", "tstop_ps", type=float, default=None, help="Stop time override (ps)."),
    click.option("--segment-um", type=float, default=None, help="Ladder segment length (µm)."),
]


def with_sim_options(fn):
    for opt in reversed(sim_options):
        fn = opt(fn)
    return fn


@click.group()
def cli():
    """Crosstalk noise analysis: 2-π RC model, coupled RLC model, ladder reference."""


@cli.command("analyze-rc")
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--out", default=None, help="Write dominant/exact noise waveforms as CSV.")
@click.option("--samples", type=int, default=None, help="Waveform sample count.")
@with_sim_options
def analyze_rc_cmd(config_path, out, samples, dt_ps, tstop_ps, segment_um):
    cfg = analysis_service.with_overrides(
        _load(config_path), out=out, samples=samples, dt_ps=dt_ps, tstop_ps=tstop_ps, segment_um=segment_um
    )
    _emit_json(analysis_service.analyze_rc(cfg))


@cli.command("analyze-rlc")
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--twa", is_flag=True, help="Use the traveling-wave fast path instead of ladders.")
@click.option("--ccprime-printed", is_flag=True, help="Use the printed coupling-capacitance variant.")
@click.option(
    "--ccprime",
    type=click.Choice(CCPRIME_VARIANTS),
    default=None,
    help="Decoupling variant: exact modes or one of the closed forms.",
)
@with_sim_options
def analyze_rlc_cmd(config_path, twa, ccprime_printed, ccprime, dt_ps, tstop_ps, segment_um):
    cfg = analysis_service.with_overrides(
        _load(config_path),
        method="twa" if twa else None,
        ccprime_variant="printed" if ccprime_printed else ccprime,
        dt_ps=dt_ps,
        tstop_ps=tstop_ps,
        segment_um=segment_um,
    )
    _emit_json(analysis_service.analyze_rlc(cfg))


@cli.command("simulate")
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--out", default=None, help="CSV path; stdout when omitted.")
@with_sim_options
def simulate_cmd(config_path, out, dt_ps, tstop_ps, segment_um):
    cfg = analysis_service.with_overrides(
        _load(config_path), out=out, dt_ps=dt_ps, tstop_ps=tstop_ps, segment_um=segment_um
    )
    waves = analysis_service.simulate(cfg)
    if cfg.output.out:
        ladder_sim.write_waveforms_csv(cfg.output.out, waves)
    else:
        _echo_csv(ladder_sim.write_waveforms, waves)


@cli.command("validate")
@click.option("--kind", type=click.Choice(["rc", "rlc"]), default="rc", show_default=True)
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--count", type=int, default=100, show_default=True)
@click.option("--symmetric", is_flag=True, help="RLC only: pin dc = dl = 0.")
@click.option("--out", default=None, help="Per-case peak errors as CSV.")
@click.option("--segment-um", type=float, default=None)
def validate_cmd(kind, seed, count, symmetric, out, segment_um):
    report, stats = analysis_service.validate_corpus(
        kind, seed=seed, count=count, symmetric=symmetric, segment_len=segment_um
    )
    if out:
        sweep_report.emit_csv(stats[0], out)
    _emit_json(report)


def _parse_grid(param: str, grid: Optional[str]) -> List[float]:
    if not grid:
        return analysis_service.DEFAULT_GRIDS[param]
    try:
        values = [float(v) for v in grid.split(",") if v.strip()]
    except ValueError as e:
        raise InputError(f"--grid must be comma-separated numbers: {e}") from e
    if param == "tr":
        values = [boundary_to_si(v, "time") for v in values]
    return values


@cli.command("sweep")
@click.option("--param", type=click.Choice(list(sweep_report.SWEEP_PARAMS)), required=True)
@click.option("--grid", default=None, help="Comma-separated values (tr in ps).")
@click.option("--fixed", "fixed_json", default=None, help='JSON object of fixed values, e.g. {"kl": 0.5}.')
@click.option("--out", default=None, help="CSV path; stdout when omitted.")
@click.option("--no-oracle", is_flag=True, help="Model column only.")
@click.option("--segment-um", type=float, default=None)
def sweep_cmd(param, grid, fixed_json, out, no_oracle, segment_um):
    fixed = {}
    if fixed_json:
        try:
            fixed = json.loads(fixed_json)
        except json.JSONDecodeError as e:
            raise InputError(f"--fixed is not valid JSON: {e.msg}") from e
    table = sweep_report.sweep(
        param,
        _parse_grid(param, grid),
        fixed,
        segment_len=segment_um,
        with_oracle=not no_oracle,
    )
    if out:
        sweep_report.emit_csv(table, out)
    else:
        _echo_csv(sweep_report.write_csv, table)


def main(argv: Optional[List[str]] = None) -> int:
    """Run the CLI and translate failures into exit codes."""
    try:
        cli.main(args=argv, prog_name="xtalk", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_INPUT
    except click.ClickException as e:
        e.show()
        return EXIT_INPUT
    except (InputError, ValidationError) as e:
        logger.error(f"❌ input error: {e}")
        return EXIT_INPUT
    except NumericalError as e:
        logger.error(f"❌ numerical failure: {e}")
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
