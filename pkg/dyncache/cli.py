"""Batch command line for DoF tables, schedules, verification and rate curves."""

import csv
import functools
import json
import logging
import subprocess
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import click

from . import __version__
from .analytics import dof_closed_form
from .config import load_config, merge_overrides, network_from_values, parse_float_list, parse_int_list
from .errors import ConstraintViolation, DyncacheError, EmptyResults
from .experiments import (SAMPLERS, compare_existing, compare_schemes, design_sweep, dof_sweep,
                          example_network, plot_script, rate_curve, table_large_antenna,
                          table_small_antenna)
from .model import Strategy
from .placement import Placement
from .scheduler import ScheduleOptions, elevate_A, full_schedule
from .verifier import count_dof, coverage_check, decode_check

logger = logging.getLogger(__name__)

# Settings of the rate-versus-SNR study used when neither flags nor --config give them.
RATE_DEFAULTS = {
    "K": 30,
    "num_profiles": 5,
    "cache_files": 1,
    "library_size": 5,
    "num_antennas": 10,
    "alpha": 8,
}


@dataclass
class RunContext:
    out: Path
    fmt: str
    file_values: dict[str, Any] = field(default_factory=dict)
    argv: list[str] = field(default_factory=list)

    def values(self, cli_values: Mapping[str, Any], defaults: Mapping[str, Any] = None) -> dict[str, Any]:
        return merge_overrides({**(defaults or {}), **self.file_values}, cli_values)

    def path(self, name: str, suffix: str = None) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        return self.out / (name + "." + (suffix or self.fmt))


def git_describe() -> str:
    try:
        proc = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True, text=True,
                              cwd=Path(__file__).resolve().parent, check=False)
    except OSError:
        return "unknown"
    return proc.stdout.strip() if proc.returncode == 0 and proc.stdout.strip() else "unknown"


def _plain(value: Any) -> Any:
    if isinstance(value, Fraction):
        return value.numerator if value.denominator == 1 else float(value)
    if isinstance(value, Strategy):
        return value.value
    if isinstance(value, (tuple, list)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    return value


def _cell(value: Any) -> str:
    value = _plain(value)
    if value is None:
        return ""
    if isinstance(value, list):
        return "-".join(str(v) for v in value)
    return str(value)


def emit_table(results: Sequence[Mapping[str, Any]], fmt: str, path: Path, columns: Sequence[str] = None) -> Path:
    """
    Writes rows as RFC-4180 CSV or as a JSON array of objects. Columns keep
    the given order, by default that of the first row.
    """
    if not results:
        raise EmptyResults("no rows to write to {}".format(path))
    columns = list(columns or results[0].keys())
    path = Path(path)
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            for row in results:
                writer.writerow([_cell(row.get(c)) for c in columns])
    elif fmt == "json":
        with path.open("w") as fh:
            json.dump([{c: _plain(row.get(c)) for c in columns} for row in results], fh, indent=2)
            fh.write("\n")
    else:
        raise ValueError("unknown format {!r}".format(fmt))
    logger.info("wrote %d rows to %s", len(results), path)
    return path


def write_sidecar(rc: RunContext, command: str, values: Mapping[str, Any], **extra: Any) -> Path:
    """Everything needed to repeat the run: argv, resolved values, seed and code version."""
    meta = {
        "command": command,
        "argv": rc.argv,
        "config": _plain(dict(sorted(values.items()))),
        "seed": values.get("seed"),
        "git": git_describe(),
        "version": __version__,
    }
    meta.update(_plain(extra))
    path = rc.path(command + ".meta", "json")
    with path.open("w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _write_plot(rc: RunContext, table: Path, x: str, ys: Sequence[str], group: str = "") -> None:
    script = rc.path(table.stem + "_plot", "py")
    script.write_text(plot_script(table.name, x, ys, group))
    logger.info("wrote plot script %s", script)


class RatioType(click.ParamType):
    """A cache ratio written as a decimal or as a fraction, e.g. 0.2 or 1/5."""

    name = "ratio"

    def convert(self, value, param, ctx):
        if isinstance(value, Fraction):
            return value
        try:
            return Fraction(str(value).strip())
        except (ValueError, ZeroDivisionError):
            self.fail("{!r} is not a ratio like 0.2 or 1/5".format(value), param, ctx)


class NumberListType(click.ParamType):
    """Comma-separated numbers, e.g. 9,8,6,5,2."""

    def __init__(self, parse: Callable[[str], list], name: str):
        self.parse = parse
        self.name = name

    def convert(self, value, param, ctx):
        if isinstance(value, list):
            return value
        try:
            return self.parse(value)
        except ValueError:
            self.fail("{!r} is not a comma-separated {}".format(value, self.name), param, ctx)


RATIO = RatioType()
INT_LIST = NumberListType(parse_int_list, "integer list")
FLOAT_LIST = NumberListType(parse_float_list, "number list")


def handle_errors(fn: Callable) -> Callable:
    """Maps library errors onto click exceptions: bad parameters exit 2, the rest exit 1."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConstraintViolation as e:
            raise click.UsageError(str(e)) from e
        except (DyncacheError, ValueError, OSError) as e:
            raise click.ClickException(str(e)) from e
    return wrapper


def network_options(fn: Callable) -> Callable:
    options = [
        click.option("--K", "K", type=int, default=None, help="Number of users (uniform split over P)."),
        click.option("--P", "P", type=int, default=None, help="Number of cache profiles."),
        click.option("--gamma", type=RATIO, default=None, help="Cache ratio M/N, e.g. 0.2 or 1/5."),
        click.option("--alpha", type=int, default=None, help="Spatial multiplexing gain."),
        click.option("--L", "L", type=int, default=None, help="Transmit antennas (default alpha)."),
        click.option("--eta-hat", type=int, default=None, help="Users per profile served by multicast."),
        click.option("--beta", type=int, default=None),
        click.option("--Q", "Q", type=int, default=None, help="Profiles per transmission."),
        click.option("--strategy", type=click.Choice(["A", "B"]), default=None),
        click.option("--lengths", type=INT_LIST, default=None, help="Users per profile, e.g. 9,8,6,5,2."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _network_values(K, P, gamma, alpha, L, eta_hat, beta, Q, strategy, lengths) -> dict[str, Any]:
    return {"K": K, "P": P, "gamma": gamma, "alpha": alpha, "L": L, "eta_hat": eta_hat,
            "beta": beta, "Q": Q, "strategy": strategy,
            "lengths": list(lengths) if lengths else None}


@click.group()
@click.option("--out", type=click.Path(file_okay=False), default="out", show_default=True,
              help="Directory for tables, reports and sidecars.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON or TOML file with parameter values; flags override it.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
@click.option("-q", "--quiet", is_flag=True, help="Warnings only.")
@click.version_option(__version__, prog_name="dyncache")
@click.pass_context
def main(ctx: click.Context, out: str, config_path: str, fmt: str, verbose: bool, quiet: bool):
    """Coded caching for shared-cache multi-antenna networks."""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s", force=True)
    try:
        file_values = load_config(config_path) if config_path else {}
    except (DyncacheError, OSError, ValueError) as e:
        raise click.UsageError(str(e)) from e
    ctx.obj = RunContext(out=Path(out), fmt=fmt, file_values=file_values,
                         argv=list((ctx.obj or {}).get("argv", sys.argv[1:])))


@main.command()
@network_options
@click.option("--sweep-sigma", is_flag=True, help="Average maximum DoF over every association, per sigma.")
@click.option("--mode", type=click.Choice(["sorted", "labeled"]), default="sorted", show_default=True,
              help="Count each partition once, or once per profile labeling.")
@click.option("--association", is_flag=True, help="DoF of every feasible (eta_hat, Q, strategy) at --lengths.")
@click.option("--plot-script", is_flag=True)
@click.pass_obj
@handle_errors
def dof(rc: RunContext, K, P, gamma, alpha, L, eta_hat, beta, Q, strategy, lengths,
        sweep_sigma, mode, association, plot_script):
    """Closed-form and counted DoF."""
    values = rc.values(_network_values(K, P, gamma, alpha, L, eta_hat, beta, Q, strategy, lengths))
    if sweep_sigma:
        try:
            K_, P_, alpha_ = int(values["K"]), int(values["num_profiles"]), int(values["alpha"])
            gamma_ = Fraction(values["cache_files"], values["library_size"])
        except KeyError as e:
            raise click.UsageError("--sweep-sigma needs --K, --P, --gamma and --alpha (missing {})".format(e.args[0]))
        per_assoc, aggregate = dof_sweep(K_, P_, gamma_, alpha_, mode)
        emit_table(per_assoc, rc.fmt, rc.path("dof_associations"),
                   ["association", "sigma", "dof_max", "eta_hat", "Q", "strategy", "fallback"])
        table = emit_table(aggregate, rc.fmt, rc.path("dof_sigma"), ["sigma", "optimal", "nocc", "weight"])
        if plot_script and rc.fmt == "csv":
            _write_plot(rc, table, "sigma", ["optimal", "nocc"])
        write_sidecar(rc, "dof", values, mode=mode)
        return
    if association:
        if not values.get("lengths"):
            raise click.UsageError("--association needs --lengths")
        gamma_ = Fraction(values["cache_files"], values["library_size"])
        rows = design_sweep(values["lengths"], gamma_, int(values["alpha"]))
        table = emit_table(rows, rc.fmt, rc.path("dof_designs"), ["eta_hat", "Q", "strategy", "dof"])
        if plot_script and rc.fmt == "csv":
            _write_plot(rc, table, "eta_hat", ["dof"], group="strategy")
        write_sidecar(rc, "dof", values)
        return

    cfg, assoc = network_from_values(values)
    schedule = full_schedule(cfg, assoc)
    row = {"strategy": cfg.strategy, "eta_hat": cfg.eta_hat, "Q": cfg.Q, "beta": cfg.beta,
           "dof_closed_form": dof_closed_form(cfg, assoc) if not schedule.residual_log else None,
           "dof_counted": count_dof(schedule), "T_M": schedule.T_M, "T_U": schedule.T_U,
           "subpacketization": schedule.per_file}
    emit_table([row], rc.fmt, rc.path("dof"))
    write_sidecar(rc, "dof", {**values, **cfg.as_dict()})


def _resolve(rc: RunContext, example: int, network: Mapping[str, Any]):
    if example is not None:
        cfg, assoc = example_network(example)
        return cfg, assoc, {"example": example, **cfg.as_dict(), "lengths": list(assoc.eta)}
    values = rc.values(network)
    cfg, assoc = network_from_values(values)
    return cfg, assoc, {**values, **cfg.as_dict()}


@main.command()
@network_options
@click.option("--example", type=click.Choice(["1", "2"]), default=None, help="Use a worked example network.")
@click.option("--efficient-multicast", is_flag=True, help="Move CC transmissions with fewer than alpha users to unicast.")
@click.pass_obj
@handle_errors
def schedule(rc: RunContext, K, P, gamma, alpha, L, eta_hat, beta, Q, strategy, lengths, example, efficient_multicast):
    """Dump the delivery schedule, one row per stream."""
    cfg, assoc, values = _resolve(rc, int(example) if example else None,
                                  _network_values(K, P, gamma, alpha, L, eta_hat, beta, Q, strategy, lengths))
    sched = full_schedule(cfg, assoc, ScheduleOptions(efficient_multicast=efficient_multicast))
    path = rc.path("schedule", "csv")
    with path.open("w", newline="") as fh:
        sched.write_csv(fh)
    logger.info("wrote %d transmissions to %s", len(sched.transmissions), path)
    write_sidecar(rc, "schedule", values, efficient_multicast=efficient_multicast, summary=sched.summary())


@main.command()
@network_options
@click.option("--example", type=click.Choice(["1", "2"]), default=None, help="Use a worked example network.")
@click.pass_context
@handle_errors
def verify(ctx: click.Context, K, P, gamma, alpha, L, eta_hat, beta, Q, strategy, lengths, example):
    """Decodability, coverage and DoF checks. Exits 1 when any check fails."""
    rc: RunContext = ctx.obj
    cfg, assoc, values = _resolve(rc, int(example) if example else None,
                                  _network_values(K, P, gamma, alpha, L, eta_hat, beta, Q, strategy, lengths))
    sched = full_schedule(cfg, assoc)
    placement = Placement(cfg, assoc)
    decode = decode_check(sched, placement, assoc)
    coverage = coverage_check(sched, placement)
    counted = count_dof(sched)
    closed = dof_closed_form(cfg, assoc)
    dof_ok = bool(sched.residual_log) or counted == closed
    report = {
        "ok": decode.ok and coverage.ok and dof_ok,
        "decode": decode.as_dict(),
        "coverage": coverage.as_dict(),
        "dof": {"counted": counted, "closed_form": closed, "ok": dof_ok},
        "schedule": sched.summary(),
        "served": [list(v) for v in assoc.served],
        "excluded": list(assoc.excluded),
    }
    if cfg.strategy is Strategy.A:
        report["windows"] = {p: [list(w) for w in ws] for p, ws in elevate_A(assoc).items()}
    path = rc.path("verify", "json")
    with path.open("w") as fh:
        json.dump(_plain(report), fh, indent=2)
        fh.write("\n")
    write_sidecar(rc, "verify", values)
    click.echo("verify: {} (decode {}, coverage {}, dof {})".format(
        "ok" if report["ok"] else "FAILED", decode.ok, coverage.ok, dof_ok))
    if not report["ok"]:
        ctx.exit(1)


@main.command()
@network_options
@click.option("--snr-list", type=FLOAT_LIST, default="0,10,20,30,40,50", show_default=True, help="SNR points in dB.")
@click.option("--trials", type=int, default=60, show_default=True, help="Association and channel draws.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--baseline", type=click.Choice(["nocc", "zf", "none"]), default="nocc", show_default=True)
@click.option("--sampler", type=click.Choice(SAMPLERS), default="composition", show_default=True)
@click.option("--eta-hat-list", type=INT_LIST, default=None, help="One curve per eta_hat at a fixed --lengths.")
@click.option("--alpha-list", type=INT_LIST, default=None, help="One curve per alpha, L fixed.")
@click.option("--plot-script", is_flag=True)
@click.pass_obj
@handle_errors
def rate(rc: RunContext, K, P, gamma, alpha, L, eta_hat, beta, Q, strategy, lengths,
         snr_list, trials, seed, baseline, sampler, eta_hat_list, alpha_list, plot_script):
    """Monte Carlo symmetric rate versus SNR."""
    values = rc.values({**_network_values(K, P, gamma, alpha, L, eta_hat, beta, Q, strategy, lengths),
                        "seed": seed, "trials": trials}, RATE_DEFAULTS)
    P_ = int(values["num_profiles"])
    fixed = values.get("lengths")
    K_ = sum(fixed) if fixed else int(values["K"])
    common = dict(K=K_, P=P_, gamma=Fraction(values["cache_files"], values["library_size"]),
                  L=int(values["num_antennas"]), snr_list=snr_list,
                  trials=int(values["trials"]), seed=int(values["seed"]),
                  strategy=Strategy(values.get("strategy") or "A"), Q=values.get("Q"),
                  sampler=sampler, lengths=fixed)
    rows = []
    if eta_hat_list:
        if not fixed:
            raise click.UsageError("--eta-hat-list needs --lengths")
        for e in eta_hat_list:
            rows += rate_curve(alpha=int(values["alpha"]), eta_hat=e, baseline="none",
                               suffix="(eta_hat={})".format(e), **common)
    elif alpha_list:
        for a in alpha_list:
            rows += rate_curve(alpha=a, eta_hat=values.get("eta_hat"), baseline=baseline,
                               suffix="(alpha={})".format(a), **common)
    else:
        rows = rate_curve(alpha=int(values["alpha"]), eta_hat=values.get("eta_hat"), baseline=baseline, **common)
    table = emit_table(rows, rc.fmt, rc.path("rate"),
                       ["snr_db", "scheme", "mean_rate", "stderr", "trials"])
    if plot_script and rc.fmt == "csv":
        _write_plot(rc, table, "snr_db", ["mean_rate"], group="scheme")
    write_sidecar(rc, "rate", values, sampler=sampler if not fixed else "fixed", baseline=baseline,
                  snr_list=common["snr_list"], eta_hat_list=eta_hat_list, alpha_list=alpha_list)


@main.command()
@network_options
@click.option("--table", "table_name", type=click.Choice(["large", "small", "existing"]), default=None,
              help="Reproduce a fixed-parameter table instead of comparing schemes.")
@click.option("--trials", type=int, default=0, show_default=True, help="Rate trials per row (0 skips rates).")
@click.option("--snr-db", type=float, default=20.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_obj
@handle_errors
def compare(rc: RunContext, K, P, gamma, alpha, L, eta_hat, beta, Q, strategy, lengths,
            table_name, trials, snr_db, seed):
    """Strategies A and B, their efficient-multicast variants and the no-CC baseline."""
    if table_name == "existing":
        rows = compare_existing()
        emit_table(rows, rc.fmt, rc.path("compare_existing"))
        write_sidecar(rc, "compare", {"table": table_name})
        return
    if table_name:
        fn = table_large_antenna if table_name == "large" else table_small_antenna
        rows = fn(snr_db=snr_db, trials=trials, seed=seed)
        emit_table(rows, rc.fmt, rc.path("compare_" + table_name))
        write_sidecar(rc, "compare", {"table": table_name, "snr_db": snr_db, "trials": trials, "seed": seed})
        return

    values = rc.values({**_network_values(K, P, gamma, alpha, L, eta_hat, beta, Q, strategy, lengths),
                        "snr_db": snr_db, "seed": seed})
    cfg, assoc = network_from_values(values)
    rows = compare_schemes(cfg, assoc, trials=trials, seed=seed)
    emit_table(rows, rc.fmt, rc.path("compare"),
               ["scheme", "dof_counted", "dof_closed_form", "T_M", "T_U", "subpacketization",
                "rerouted", "residual", "mean_rate"])
    write_sidecar(rc, "compare", {**values, **cfg.as_dict()}, trials=trials)


def run(argv: Sequence[str] = None) -> int:
    """Runs the CLI in-process and returns its exit code instead of exiting."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        rv = main.main(args=argv, prog_name="dyncache", standalone_mode=False,
                       obj={"argv": argv})
    except click.UsageError as e:
        e.show()
        return 2
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.Abort:
        click.echo("Aborted!", err=True)
        return 1
    return rv if isinstance(rv, int) else 0


def cli_entry() -> None:
    sys.exit(run())
