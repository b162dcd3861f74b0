import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional

import click

from acnsim.config import Settings, build_mc_config, parse_config, serialize_config
from acnsim.errors import (
    AnalyticDomainError,
    ConfigError,
    NumericalFailure,
    SceneError,
    UnknownProtocolError,
)
from acnsim.experiments import RunManifest, crosscheck as run_crosscheck, emit_csv, run_sweep
from acnsim.protocols import ProtocolKind

logger = logging.getLogger("acnsim.cli")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_DEVIATION = 3


@contextmanager
def exit_codes() -> Iterator[None]:
    """Report library errors on stderr and turn them into the documented exit codes."""
    try:
        yield
    except (ConfigError, SceneError, AnalyticDomainError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except NumericalFailure as exc:
        click.echo(f"numerical failure: {exc} (abserr {exc.abserr:.3e})", err=True)
        sys.exit(EXIT_NUMERICAL)


def load(path: str, settings: Settings):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(path, f"cannot read config file: {exc.strerror}") from exc
    return parse_config(text, settings)


def apply_overrides(spec, cfg, **overrides):
    """Command-line flags win over config keys; None means not given."""
    protocols = overrides.pop("protocols", None)
    if protocols is not None:
        try:
            kinds = tuple(ProtocolKind.parse(name) for name in protocols.split(",") if name.strip())
        except UnknownProtocolError as exc:
            raise ConfigError("--protocols", str(exc.args[0])) from exc
        spec = spec.copy(update={"protocols": kinds})
    given = {name: value for name, value in overrides.items() if value is not None}
    if given:
        cfg = build_mc_config({**cfg.dict(), **given})
    return spec, cfg


@click.group()
@click.pass_context
def cli(ctx: click.Context) -> None:
    """Outage of adaptive cooperative NOMA at a road intersection."""
    settings = Settings()
    logging.basicConfig(
        stream=sys.stderr,
        level=settings.log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )
    ctx.obj = settings


@cli.command()
@click.argument("config_file")
@click.option("--out", type=click.Path(dir_okay=False), help="CSV path; stdout when omitted.")
@click.option("--seed", type=int)
@click.option("--trials", type=int)
@click.option("--mode", help="factorized or correlated")
@click.option("--protocols", help="Comma-separated protocol names.")
@click.option("--workers", type=int, help="Worker processes, 0 for one per core.")
@click.pass_obj
def simulate(
    settings: Settings,
    config_file: str,
    out: Optional[str],
    seed: Optional[int],
    trials: Optional[int],
    mode: Optional[str],
    protocols: Optional[str],
    workers: Optional[int],
) -> None:
    """Run the sweep of CONFIG_FILE and write the result table as CSV."""
    with exit_codes():
        scene, spec, cfg = load(config_file, settings)
        spec, cfg = apply_overrides(
            spec,
            cfg,
            seed=seed,
            trials=trials,
            mode=mode.lower() if mode else None,
            protocols=protocols,
            workers=workers,
        )
        spec.check_against(scene)
        manifest = RunManifest.build(scene, spec, cfg)
        payload = emit_csv(run_sweep(scene, spec, cfg))

        if out is None:
            click.echo(payload.decode("utf-8"), nl=False)
            return
        Path(out).write_bytes(payload)
        Path(f"{out}.manifest").write_text(
            serialize_config(scene, spec, cfg, manifest), encoding="utf-8"
        )
        logger.info("wrote %s and %s.manifest", out, out)


@cli.command()
@click.argument("config_file")
@click.pass_obj
def validate(settings: Settings, config_file: str) -> None:
    """Parse CONFIG_FILE and check every sweep point without simulating."""
    with exit_codes():
        scene, spec, cfg = load(config_file, settings)
        spec.check_against(scene)
        points = RunManifest.build(scene, spec, cfg).points
        click.echo(
            f"ok: {len(points)} {spec.parameter.value} point(s), "
            f"protocols {','.join(kind.value for kind in spec.protocols)}, "
            f"outputs {spec.outputs.value}, {cfg.trials} trial(s) in {cfg.mode.value} mode"
        )


@cli.command()
@click.argument("config_file")
@click.option("--threshold", type=float, help="Allowed deviation in standard errors.")
@click.option("--seed", type=int)
@click.option("--trials", type=int)
@click.option("--workers", type=int)
@click.pass_obj
def crosscheck(
    settings: Settings,
    config_file: str,
    threshold: Optional[float],
    seed: Optional[int],
    trials: Optional[int],
    workers: Optional[int],
) -> None:
    """Compare the closed forms with factorized Monte-Carlo over the sweep of CONFIG_FILE."""
    limit = settings.crosscheck_threshold if threshold is None else threshold
    with exit_codes():
        scene, spec, cfg = load(config_file, settings)
        spec, cfg = apply_overrides(spec, cfg, seed=seed, trials=trials, workers=workers)
        deviations = run_crosscheck(scene, spec, cfg)

    for dev in deviations:
        click.echo(
            f"{spec.parameter.value}={dev.sweep_value:g} {dev.protocol.value} {dev.destination.value}: "
            f"analytic {dev.analytic:.6e} windowed {dev.target:.6e} mc {dev.mc:.6e} "
            f"({dev.sigmas:.2f} stderr)"
        )
    worst = max(dev.sigmas for dev in deviations)
    click.echo(f"max deviation: {worst:.3f} stderr (threshold {limit:g})")
    if worst > limit:
        sys.exit(EXIT_DEVIATION)


if __name__ == "__main__":
    cli()
