"""Command line interface: ``tradealloc run|replay|compare|simulate``."""

from __future__ import annotations

import functools
import json
import sys

import click

from ..ledger import LedgerError
from ..methods import result_from_allocations
from .config import load_config
from .io import InputError, parse_accounts, parse_allocations, parse_blotter
from .report import FORMATS, METHODS, compare, emit_report, run_method, run_report
from .simulate import load_spec, simulate


def _fail(record: dict) -> None:
    click.echo(json.dumps(record, sort_keys=True), err=True)
    sys.exit(2)


def handle_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except InputError as exc:
            _fail(exc.record())
        except LedgerError as exc:
            _fail({"error": "ledger", "message": str(exc), "seq": exc.seq})
        except (ValueError, OSError) as exc:
            _fail({"error": type(exc).__name__, "message": str(exc)})
    return wrapper


def _output(report, out, fmt):
    text = emit_report(report, out, fmt)
    if out is None:
        click.echo(text, nl=False)


def _common(func):
    func = click.option("--format", "fmt", type=click.Choice(FORMATS), default="json",
                        show_default=True, help="Report format.")(func)
    func = click.option("--out", type=click.Path(dir_okay=False),
                        help="Output file (default: stdout).")(func)
    func = click.option("--config", type=click.Path(dir_okay=False),
                        help="YAML/JSON configuration file.")(func)
    return func


def _inputs(func):
    func = click.option("--accounts", required=True, type=click.Path(dir_okay=False),
                        help="CSV with account_id,aum.")(func)
    func = click.option("--fills", required=True, type=click.Path(dir_okay=False),
                        help="CSV with seq,day,price,qty.")(func)
    return func


@click.group()
def main():
    """Allocate bunched-order fills across accounts and compare methods."""


@main.command()
@_inputs
@click.option("--method", type=click.Choice(METHODS), default="four", show_default=True)
@_common
@handle_errors
def run(fills, accounts, method, config, out, fmt):
    """Run one allocation method and report its trajectory."""
    cfg = load_config(config)
    fill_list, acct_list = parse_blotter(fills), parse_accounts(accounts)
    result = run_method(method, fill_list, acct_list, cfg)
    _output(run_report(result, acct_list, cfg), out, fmt)


@main.command()
@_inputs
@click.option("--allocations", required=True, type=click.Path(dir_okay=False),
              help="CSV with seq,account_id,qty.")
@_common
@handle_errors
def replay(fills, accounts, allocations, config, out, fmt):
    """Drive the ledger with a fixed allocation file."""
    cfg = load_config(config)
    fill_list, acct_list = parse_blotter(fills), parse_accounts(accounts)
    allocs = parse_allocations(allocations, fill_list, acct_list)
    result = result_from_allocations("replay", fill_list, acct_list, allocs)
    _output(run_report(result, acct_list, cfg), out, fmt)


def _replay_option(value):
    name, sep, path = value.partition("=")
    if not sep or not name or not path:
        raise click.BadParameter(f"expected NAME=PATH, got {value!r}")
    return name, path


@main.command(name="compare")
@_inputs
@click.option("--replay", "replays", multiple=True, metavar="NAME=PATH",
              help="Add a row replaying an allocation file (repeatable).")
@_common
@handle_errors
def compare_cmd(fills, accounts, replays, config, out, fmt):
    """Compare every method on one blotter."""
    cfg = load_config(config)
    fill_list, acct_list = parse_blotter(fills), parse_accounts(accounts)
    extra = {}
    for value in replays:
        name, path = _replay_option(value)
        extra[name] = parse_allocations(path, fill_list, acct_list)
    _output(compare(fill_list, acct_list, cfg, extra), out, fmt)


@main.command(name="simulate")
@click.option("--spec", type=click.Path(dir_okay=False), help="YAML simulation spec.")
@click.option("--seed", type=int, help="Override the simulation master seed.")
@click.option("--scenarios", type=int, help="Override the number of scenarios.")
@click.option("--jobs", type=int, default=1, show_default=True, help="Worker processes.")
@_common
@handle_errors
def simulate_cmd(spec, seed, scenarios, jobs, config, out, fmt):
    """Monte Carlo comparison of all methods on synthetic blotters."""
    cfg = load_config(config)
    sim = load_spec(spec, seed=seed, scenarios=scenarios)
    _output(simulate(sim, cfg, jobs), out, fmt)


if __name__ == "__main__":
    main()
