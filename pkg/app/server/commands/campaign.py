from pathlib import Path
from typing import Optional

import orjson
import typer
import yaml
from rich.console import Console
from rich.table import Table

from app.server.config import config
from app.server.handler.error_handler import exit_on_error
from app.server.handler.exceptions import InvalidInputError
from app.server.models.campaign import BaselineSpec
from app.server.models.record import EvaluationRecord
from app.server.models.space import Configuration
from app.server.services import harness
from app.server.services import space as space_service
from app.server.services import store as store_service
from app.server.services.campaign import CampaignService, format_configuration, load_campaign, resolve_direction
from app.server.services.ensemble import progress_snapshot
from app.server.static import localization
from app.server.static.enums import Direction

router = typer.Typer()
console = Console()


def _configuration_table(cfg: Configuration) -> Table:
    table = Table(title='best configuration')
    table.add_column('parameter')
    table.add_column('value')
    for name, value in cfg.values.items():
        table.add_row(name, space_service.format_value(value))
    return table


def _summarize(records: list[EvaluationRecord], direction: Direction, elapsed_total: float, baseline: Optional[BaselineSpec]) -> dict:
    """Prints the best result, status counts, gain over the baseline and total time; returns them for --json"""
    snapshot = progress_snapshot(records, direction, elapsed_total)
    counts = ', '.join(f'{status} {count}' for status, count in snapshot.status_counts.items())
    typer.echo(f'evaluations: {snapshot.n_done} ({counts})')
    summary = snapshot.model_dump(mode='json')
    if snapshot.best_config is None:
        typer.echo('best objective: none (no ok evaluations)')
    else:
        typer.echo(f'best objective: {snapshot.best_objective:.6g}')
        typer.echo(f'best configuration: {format_configuration(snapshot.best_config)}')
        console.print(_configuration_table(snapshot.best_config))
        if baseline is not None:
            percent = store_service.improvement_percent(baseline, snapshot.best_objective)
            typer.echo(f'improvement: {percent:.2f}% over baseline {baseline.objective:.6g}')
            summary['improvement_percent'] = percent
    typer.echo(f'autotuning time: {snapshot.elapsed_total:.3f} s')
    return summary


@router.command('run', help='Run an autotuning campaign and write results.csv')
@exit_on_error
def cmd_run(
    campaign_file: Path = typer.Argument(..., help='Campaign document (YAML or JSON)'),
    workers: Optional[int] = typer.Option(None, '--workers', help='Concurrent evaluations'),
    max_evals: Optional[int] = typer.Option(None, '--max-evals', help='Evaluation budget'),
    timeout: Optional[float] = typer.Option(None, '--timeout', help='Per-evaluation timeout in seconds'),
    kappa: Optional[float] = typer.Option(None, '--kappa', help=f'LCB exploration weight (default {config.DEFAULT_KAPPA})'),
    seed: Optional[int] = typer.Option(None, '--seed'),
    direction: Optional[Direction] = typer.Option(None, '--direction'),
    penalty: Optional[float] = typer.Option(None, '--penalty', help='Objective recorded for failed evaluations'),
    wall_clock_budget: Optional[float] = typer.Option(None, '--wall-clock-budget', help='Stop dispatching after this many seconds'),
    output_dir: Optional[Path] = typer.Option(None, '--output-dir', help='Overrides output_dir of the campaign file'),
    dry_run: bool = typer.Option(False, '--dry-run', help='Print the launcher lines of the first batch and exit'),
    reproducible_timestamps: bool = typer.Option(False, '--reproducible-timestamps', help='Write 0 for all times in results.csv'),
    resume: bool = typer.Option(False, '--resume', help='Continue an existing results.csv'),
    as_json: bool = typer.Option(False, '--json', help='Also print the final snapshot as one JSON line'),
) -> None:
    overrides = {
        'n_workers': workers,
        'max_evals': max_evals,
        'eval_timeout': timeout,
        'kappa': kappa,
        'seed': seed,
        'direction': direction,
        'timeout_penalty': penalty,
        'wall_clock_budget': wall_clock_budget,
    }
    loaded = load_campaign(campaign_file, overrides, output_dir=output_dir)
    service = CampaignService()
    if dry_run:
        for line in service.dry_run(loaded):
            typer.echo(line)
        return

    result = service.run(loaded, resume=resume, reproducible_timestamps=reproducible_timestamps)
    typer.echo(f'stop: {result.stop_reason.value}')
    summary = _summarize(result.records, loaded.config.direction, result.elapsed_total, loaded.baseline)
    typer.echo(f'results: {loaded.results_path}')
    if as_json:
        summary['stop_reason'] = result.stop_reason.value
        typer.echo(orjson.dumps(summary).decode())


@router.command('report', help='Summarize a results.csv against an optional baseline')
@exit_on_error
def cmd_report(
    results: Path = typer.Argument(..., help='results.csv of a campaign'),
    baseline: Optional[float] = typer.Option(None, '--baseline', help='Baseline objective for the improvement'),
    direction: Optional[Direction] = typer.Option(None, '--direction'),
    campaign_file: Optional[Path] = typer.Option(None, '--campaign', help='Campaign document supplying direction and baseline'),
) -> None:
    direction, configured = resolve_direction(direction, campaign_file)
    records = store_service.read_records(results)
    if not records:
        raise InvalidInputError(f'{localization.EXCEPTION_RESULTS_EMPTY}: {results}')
    spec = BaselineSpec(objective=baseline, provenance='command line', direction=direction) if baseline is not None else configured
    elapsed_total = max(record.finished_at for record in records)
    _summarize(records, direction, elapsed_total, spec)


@router.command('sample', help='Print seeded random configurations of a space')
@exit_on_error
def cmd_sample(
    space_file: Path = typer.Argument(..., help='Space document (YAML or JSON)'),
    n: int = typer.Option(5, '-n', '--n', min=1, help='Number of configurations'),
    seed: int = typer.Option(config.DEFAULT_SEED, '--seed'),
    as_json: bool = typer.Option(False, '--json', help='One JSON object per line, null for Inactive'),
) -> None:
    space = space_service.load_space(space_file)
    for cfg in CampaignService().sample(space, n, seed):
        typer.echo(orjson.dumps(cfg.values).decode() if as_json else format_configuration(cfg))


@router.command('trace', help='Export trace.csv (t_sec, objective, status) from a results.csv')
@exit_on_error
def cmd_trace(
    results: Path = typer.Argument(..., help='results.csv of a campaign'),
    out: Path = typer.Option(Path(config.TRACE_FILE_NAME), '--out', help='Where to write the trace'),
    baseline: Optional[float] = typer.Option(None, '--baseline', help='Adds a baseline reference row'),
    direction: Optional[Direction] = typer.Option(None, '--direction'),
    campaign_file: Optional[Path] = typer.Option(None, '--campaign', help='Campaign document supplying direction and baseline'),
) -> None:
    direction, configured = resolve_direction(direction, campaign_file)
    spec = BaselineSpec(objective=baseline, provenance='command line', direction=direction) if baseline is not None else configured
    series = CampaignService().write_trace(store_service.read_records(results), out, spec)
    incumbent = store_service.incumbent_series(series, direction)
    typer.echo(f'wrote {len(series)} rows to {out}')
    if incumbent:
        typer.echo(f'final incumbent: {incumbent[-1].objective:.6g} at {incumbent[-1].t_sec:.3f} s')


@router.command('validate', help='Check a space or campaign document')
@exit_on_error
def cmd_validate(document: Path = typer.Argument(..., help='Space or campaign document')) -> None:
    typer.echo(f'ok: {CampaignService().validate_document(document)}')


@router.command('baseline', help='Measure the default configuration and suggest a timeout')
@exit_on_error
def cmd_baseline(
    campaign_file: Path = typer.Argument(..., help='Campaign document'),
    repeats: int = typer.Option(config.DEFAULT_BASELINE_REPEATS, '--repeats', min=1),
    timeout: Optional[float] = typer.Option(None, '--timeout', help='Per-run timeout in seconds'),
    output_dir: Optional[Path] = typer.Option(None, '--output-dir'),
) -> None:
    loaded = load_campaign(campaign_file, {'eval_timeout': timeout}, defaults={'eval_timeout': config.DEFAULT_BASELINE_TIMEOUT}, output_dir=output_dir)
    spec = CampaignService().baseline(loaded, repeats)
    typer.echo(yaml.safe_dump({'baseline': spec.model_dump(mode='json')}, sort_keys=False).rstrip())
    if spec.runtime:
        typer.echo(f'suggested eval_timeout: {harness.default_timeout(spec.runtime):.3f} s')
