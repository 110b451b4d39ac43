# deloclab/cli.py

import logging
import sys
from pathlib import Path

import click

from deloclab import settings
from deloclab.errors import ConfigError, LabError
from deloclab.expcli import emit, get_registry, parse_config, run_experiment

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _configure_logging():
    logging.basicConfig(
        level=getattr(logging, settings.LAB_LOG_LEVEL, logging.WARNING),
        format="%(asctime)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )


def _parse_params(items) -> dict:
    params = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"expected KEY=VALUE, got {item!r}", "param")
        params[key.strip()] = value.strip()
    return params


def _list_experiments():
    registry = get_registry()
    for name in registry.names():
        schema = registry.get_schema(name)
        click.echo(f"{name:<22} {schema.description}")
        for spec in schema.parameters:
            default = "required" if spec.required else f"default {spec.default!r}"
            click.echo(f"    {spec.name:<10} {spec.kind:<10} {default}  {spec.help}")


@click.command(context_settings={"help_option_names": ["-h", "--help"]})
@click.argument("experiment", required=False)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="JSON configuration file")
@click.option("--seed", help="Master seed (unsigned 64-bit); generated and echoed when absent")
@click.option("--trials", help="Number of phase draws")
@click.option("--samples", help="Number of Monte Carlo samples")
@click.option("--n", "n", help="N (channel length, number of terms) or the n schedule")
@click.option("--snr", help="SNR value(s) P, comma separated")
@click.option("--profile", help="Power profile preset or JSON file")
@click.option("--eps", help="Epsilon grid, comma separated")
@click.option("--epsilon0", help="Class margin epsilon0")
@click.option("--out", help="Output file (stdout by default)")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), help="Output format")
@click.option("--workers", help="Worker processes")
@click.option("--param", "extra", multiple=True, help="Extra parameter as KEY=VALUE (repeatable)")
@click.option("--no-timing", is_flag=True, default=False, help="Omit wall_time so outputs compare byte for byte")
@click.option("--list", "list_only", is_flag=True, default=False, help="List experiments and exit")
def lab(experiment, config_path, seed, trials, samples, n, snr, profile, eps, epsilon0, out, fmt, workers, extra,
        no_timing, list_only):
    """Run a laboratory EXPERIMENT and print its result records."""
    _configure_logging()
    if list_only:
        _list_experiments()
        return

    try:
        source = Path(config_path).read_text(encoding="utf-8") if config_path else None
        overrides = _parse_params(extra)
        overrides.update({
            "experiment": experiment,
            "seed": seed,
            "trials": trials,
            "samples": samples,
            "n": n,
            "snr": snr,
            "profile": profile,
            "eps": eps,
            "epsilon0": epsilon0,
            "out": out,
            "format": fmt,
            "workers": workers,
        })
        if no_timing:
            overrides["timing"] = False
        config = parse_config(source, overrides)
        if not config.seed_given:
            logging.warning(f"No seed configured; using generated seed {config.seed}")
        records = run_experiment(config)
        emit(records, config.format, config.out, config.timing)
    except ConfigError as e:
        click.echo(f"configuration error: {e}", err=True)
        sys.exit(EXIT_VALIDATION)
    except (LabError, OSError) as e:
        click.echo(f"error: {e}", err=True)
        for note in getattr(e, "__notes__", []):
            click.echo(f"  {note}", err=True)
        sys.exit(EXIT_RUNTIME)


def main(args=None):
    """Console entry point; usage errors exit with the validation code."""
    try:
        code = lab.main(args=args, prog_name="lab", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        sys.exit(EXIT_VALIDATION)
    except click.exceptions.Abort:
        sys.exit(EXIT_RUNTIME)
    sys.exit(code or EXIT_OK)


if __name__ == "__main__":
    main()
