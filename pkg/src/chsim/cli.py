import logging
import sys
from pathlib import Path
from typing import Any

import click
from pydantic import BaseModel, ConfigDict, ValidationError

from chsim.config import get_settings
from chsim.constants import LOG_FORMAT
from chsim.operators import parse_decomposition, parse_operator
from chsim.report import BatchReport, ExitCode, Report
from chsim.repositories.scenario_repository import (
    ScenarioFileError,
    ScenarioRepository,
    get_scenario_repo,
)
from chsim.runners import (
    RunOptions,
    classify,
    error_report,
    execute_path,
    run_batch,
    run_calibration,
    run_refinement,
    run_scenario,
)
from chsim.scenarios import HistoriesScenario, ValuationScenario
from chsim.utils import validated_update

logger = logging.getLogger(__name__)

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


class CliState(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    options: RunOptions
    as_json: bool
    parallelism: int
    repository: ScenarioRepository


class ExitCodeGroup(click.Group):
    """Maps every way out of the command line onto the documented exit codes."""

    def main(self, *args: Any, standalone_mode: bool = True, **kwargs: Any) -> Any:
        try:
            rv = super().main(*args, standalone_mode=False, **kwargs)
        except click.ClickException as exc:
            exc.show()
            rv = ExitCode.VALIDATION
        except click.Abort:
            click.echo("Aborted!", err=True)
            rv = ExitCode.VALIDATION
        except Exception as exc:
            logger.exception("Command failed")
            click.echo(f"Error: {type(exc).__name__}: {exc}", err=True)
            _, rv = classify(exc)
        if standalone_mode:
            sys.exit(int(rv or 0))
        return rv


def configure_logging(level: str) -> None:
    logging.basicConfig(level=level.upper(), format=LOG_FORMAT, stream=sys.stderr, force=True)


def emit(state: CliState, report: Report | BatchReport) -> ExitCode:
    click.echo(report.to_json() if state.as_json else report.to_text())
    return report.exit_code


def _save(state: CliState, report: Report | BatchReport) -> None:
    path = state.repository.save_report(report)
    logger.info("Report written to %s", path)


@click.group(cls=ExitCodeGroup)
@click.option("--json", "as_json", is_flag=True, help="Print reports as canonical JSON.")
@click.option(
    "--tolerance",
    type=click.FloatRange(min=0.0, min_open=True),
    help="Acceptance threshold for report checks (default 1e-9).",
)
@click.option("--seed", type=click.IntRange(min=0, max=2**64 - 1), help="Seed for generated trials.")
@click.option("--max-dim", type=click.IntRange(min=1), help="Largest total Hilbert space dimension.")
@click.option("--log-level", type=click.Choice(LOG_LEVELS, case_sensitive=False))
@click.pass_context
def cli(
    ctx: click.Context,
    as_json: bool,
    tolerance: float | None,
    seed: int | None,
    max_dim: int | None,
    log_level: str | None,
) -> None:
    """Run consistent-histories scenarios and report the checks they declare."""
    try:
        settings = get_settings()
    except ValidationError as exc:
        raise click.UsageError(f"Invalid settings: {exc}") from exc
    configure_logging(log_level or settings.log_level)
    overrides = {"tolerance": tolerance, "seed": seed, "max_dim": max_dim}
    options = validated_update(
        RunOptions.from_settings(settings),
        {k: v for k, v in overrides.items() if v is not None},
    )
    ctx.obj = CliState(
        options=options,
        as_json=as_json,
        parallelism=settings.parallelism,
        repository=get_scenario_repo(),
    )


@cli.command()
@click.argument("path", type=click.Path(path_type=Path))
@click.option("--save", is_flag=True, help="Also write the report to the report directory.")
@click.pass_obj
def run(state: CliState, path: Path, save: bool) -> ExitCode:
    """Run one scenario file."""
    report = execute_path(path, state.options, state.repository)
    if save:
        _save(state, report)
    return emit(state, report)


@cli.command()
@click.argument("paths", nargs=-1, type=click.Path(path_type=Path))
@click.option("--parallelism", type=click.IntRange(min=1), help="Scenarios run at once.")
@click.option("--save", is_flag=True, help="Also write the batch report to the report directory.")
@click.pass_obj
def batch(state: CliState, paths: tuple[Path, ...], parallelism: int | None, save: bool) -> ExitCode:
    """Run several scenario files, by default the whole fixture suite."""
    if not paths:
        try:
            paths = tuple(state.repository.fixture_paths())
        except ScenarioFileError as exc:
            raise click.UsageError(str(exc)) from exc
        if not paths:
            raise click.UsageError(f"No scenario files in {state.repository.fixtures}")
    report = run_batch(paths, state.options, state.repository, parallelism or state.parallelism)
    if save:
        _save(state, report)
    return emit(state, report)


@cli.command()
@click.argument("measured")
@click.option("--dim-m", type=click.IntRange(min=2), required=True, help="Apparatus dimension.")
@click.option("--ready-rank", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--dump", is_flag=True, help="Include the apparatus unitary.")
@click.pass_obj
def calibrate(state: CliState, measured: str, dim_m: int, ready_rank: int, dump: bool) -> ExitCode:
    """Build a pointer apparatus for MEASURED and verify its calibration.

    MEASURED is an observable by name (spin_half_sz, diag:[1,1,2]) or a decomposition as JSON.
    """
    options = validated_update(state.options, {"dump": dump})
    try:
        spec = parse_decomposition(measured)
    except Exception as exc:
        return emit(state, error_report("calibrate", "measurement", exc))
    return emit(state, run_calibration(spec, dim_m, ready_rank, options))


@cli.command()
@click.argument("a")
@click.argument("b")
@click.option("--dump", is_flag=True, help="Include the refinement projectors.")
@click.pass_obj
def refine(state: CliState, a: str, b: str, dump: bool) -> ExitCode:
    """Dump the common refinement of two compatible observables A and B."""
    options = validated_update(state.options, {"dump": dump})
    try:
        first, second = parse_operator(a), parse_operator(b)
    except Exception as exc:
        return emit(state, error_report("refine", "joint-measurement", exc))
    return emit(state, run_refinement(first, second, options))


def _load_kind(state: CliState, path: Path, kind: type) -> tuple[Any, Report | None]:
    try:
        scenario = state.repository.load(path)
    except Exception as exc:
        return None, error_report(path.stem, "unknown", exc)
    if not isinstance(scenario, kind):
        raise click.BadParameter(f"{path} is a {scenario.kind} scenario", param_hint="PATH")
    return scenario, None


@cli.command()
@click.argument("path", type=click.Path(path_type=Path))
@click.pass_obj
def consistency(state: CliState, path: Path) -> ExitCode:
    """Dump the decoherence matrix of a histories scenario and check consistency."""
    scenario, failure = _load_kind(state, path, HistoriesScenario)
    if failure is not None:
        return emit(state, failure)
    options = validated_update(state.options, {"dump": True})
    return emit(state, run_scenario(scenario, options, path.stem))


@cli.command()
@click.argument("path", type=click.Path(path_type=Path))
@click.option("--reference", is_flag=True, help="Compare with exhaustive enumeration.")
@click.pass_obj
def valuation(state: CliState, path: Path, reference: bool) -> ExitCode:
    """Search a noncontextual valuation for the contexts of a valuation scenario."""
    scenario, failure = _load_kind(state, path, ValuationScenario)
    if failure is not None:
        return emit(state, failure)
    if reference:
        payload = scenario.payload.model_copy(update={"reference": True})
        scenario = scenario.model_copy(update={"payload": payload})
    return emit(state, run_scenario(scenario, state.options, path.stem))
