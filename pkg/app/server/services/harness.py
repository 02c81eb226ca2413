import contextlib
import math
import os
import re
import signal
import subprocess
import time
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Optional, Protocol

import anyio

from app.server.config import config
from app.server.handler.exceptions import EvaluatorSetupError
from app.server.logger.custom_logger import logger
from app.server.models.campaign import CodeMold, MetricSpec, RenderedMold
from app.server.models.generic import MaybeValue
from app.server.models.record import EvaluationOutcome
from app.server.models.space import Configuration, ParameterSpace
from app.server.services import space as space_service
from app.server.static import constants, localization
from app.server.static.enums import Direction, EvalStatus, MetricKind, MetricSource

# the digit run is greedy, so `#P10` is always read whole and never as `#P1` followed by `0`
_PLACEHOLDER = re.compile(r'#(P\d+)')

SCRIPT_FILE_NAME = 'script'
STDOUT_FILE_NAME = 'stdout.log'
STDERR_FILE_NAME = 'stderr.log'
LAUNCHER_ARGS_ENV = 'TUNER_LAUNCHER_ARGS'


class Evaluator(Protocol):
    """Anything the ensemble can hand a configuration to"""

    direction: Direction

    async def evaluate(self, cfg: Configuration, eval_id: int) -> EvaluationOutcome: ...


def placeholders(text: str) -> list[str]:
    """Parameter names referenced by `#Pk` placeholders, in order of first appearance"""
    return list(dict.fromkeys(_PLACEHOLDER.findall(text)))


def check_mold(space: ParameterSpace, mold: CodeMold) -> None:
    """
    Raises:
        EvaluatorSetupError: If any template references a parameter the space does not define.
    """
    known = set(space.names)
    for text in (mold.template_text, mold.launcher_template, mold.pre_command or ''):
        unknown = [name for name in placeholders(text) if name not in known]
        if unknown:
            raise EvaluatorSetupError(f'{localization.EXCEPTION_UNKNOWN_PLACEHOLDER}: #{unknown[0]}')


def render_text(text: str, values: Mapping[str, MaybeValue]) -> str:
    def substitute(match: re.Match) -> str:
        name = match.group(1)
        if name not in values:
            raise ValueError(f'{localization.EXCEPTION_UNKNOWN_PLACEHOLDER}: #{name}')
        return space_service.format_value(values[name])

    rendered = _PLACEHOLDER.sub(substitute, text)
    if leftover := _PLACEHOLDER.search(rendered):
        raise ValueError(f'{localization.EXCEPTION_UNRESOLVED_PLACEHOLDER}: {leftover.group(0)}')
    return rendered


def render_mold(mold: CodeMold, cfg: Configuration) -> RenderedMold:
    """
    Instantiates the script, launcher arguments and optional pre-command for one configuration.

    Every `#Pk` becomes the value of parameter `Pk`; Inactive values render as `nan`.
    Text without placeholders is returned unchanged, so rendering is idempotent.

    Raises:
        ValueError: On a placeholder naming an unknown parameter or one left after rendering.
    """
    return RenderedMold(
        script_text=render_text(mold.template_text, cfg.values),
        launcher_args=render_text(mold.launcher_template, cfg.values),
        pre_command=render_text(mold.pre_command, cfg.values) if mold.pre_command else None,
    )


def command_line(mold: CodeMold, rendered: RenderedMold, script_path: Path) -> str:
    """Full launcher line as a scheduler would run it; recorded, never executed"""
    return ' '.join(part for part in (mold.launcher_command, rendered.launcher_args.strip(), f'bash {script_path}') if part)


def aggregate_energy(per_node: Sequence[tuple[float, float]]) -> float:
    """
    Mean node energy in joules, where a node's energy is its package plus DRAM energy.

    Raises:
        ValueError: On an empty list or a negative or non-finite energy.
    """
    if not per_node:
        raise ValueError('aggregate_energy needs at least one node')
    totals = []
    for package, dram in per_node:
        if not (math.isfinite(package) and math.isfinite(dram)) or package < 0 or dram < 0:
            raise ValueError(f'node energies must be finite and non-negative, got ({package}, {dram})')
        totals.append(package + dram)
    return math.fsum(totals) / len(totals)


def compute_edp(energy: float, runtime: float) -> float:
    if energy < 0 or runtime < 0:
        raise ValueError(f'energy and runtime must be non-negative, got ({energy}, {runtime})')
    return energy * runtime


def default_timeout(baseline_runtime: float) -> float:
    if not baseline_runtime > 0:
        raise ValueError(f'baseline runtime must be positive, got {baseline_runtime}')
    return constants.TIMEOUT_FACTOR * baseline_runtime


def timeout_outcome(timeout: float, penalty: float, direction: Direction, elapsed: float) -> EvaluationOutcome:
    """Minimize metrics record the timeout itself; maximize metrics record the penalty"""
    objective = timeout if direction == Direction.MINIMIZE else penalty
    return EvaluationOutcome(objective=objective, status=EvalStatus.TIMEOUT, elapsed=elapsed, detail=f'killed after {timeout:g}s')


def failure_outcome(penalty: float, elapsed: float, detail: str) -> EvaluationOutcome:
    return EvaluationOutcome(objective=penalty, status=EvalStatus.FAIL, elapsed=elapsed, detail=detail)


def last_match(pattern: str, text: str) -> float:
    """Value of the last match's capture group; applications may print intermediate rates first"""
    matches = re.findall(pattern, text)
    if not matches:
        raise ValueError(f'pattern {pattern!r} not found in output')
    return float(matches[-1])


def read_node_energies(text: str, fields: Sequence[str]) -> list[tuple[float, float]]:
    """
    Parses a metrics file with one `package_energy_j dram_energy_j` line per node.

    An optional header naming the fields selects the columns; without one the first two are used.
    """
    rows = [line.split() for line in text.splitlines() if line.strip() and not line.lstrip().startswith('#')]
    columns = (0, 1)
    if rows and all(field in rows[0] for field in fields):
        header = rows.pop(0)
        columns = (header.index(fields[0]), header.index(fields[1]))
    try:
        return [(float(row[columns[0]]), float(row[columns[1]])) for row in rows]
    except IndexError as error:
        raise ValueError('metrics file line has fewer than two fields') from error


def parse_objective(metric: MetricSpec, stdout_text: str, elapsed: float, metrics_text: Optional[str] = None) -> float:
    """
    Extracts the objective of a finished evaluation.

    Raises:
        ValueError: When the output does not contain the metric.
    """
    if metric.source == MetricSource.WALL_TIME:
        return elapsed
    if metric.source == MetricSource.STDOUT_REGEX:
        return last_match(metric.pattern, stdout_text)

    if metrics_text is None:
        raise ValueError(f'metrics file {metric.path!r} was not written')
    if metric.kind in (MetricKind.ENERGY, MetricKind.EDP):
        energy = aggregate_energy(read_node_energies(metrics_text, metric.fields))
        if metric.kind == MetricKind.ENERGY:
            return energy
        runtime = last_match(metric.runtime_pattern, stdout_text) if metric.runtime_pattern else elapsed
        return compute_edp(energy, runtime)
    lines = [line for line in metrics_text.splitlines() if line.strip()]
    if not lines:
        raise ValueError(f'metrics file {metric.path!r} is empty')
    return float(lines[-1].split()[0])


def kill_process_tree(pid: int) -> None:
    """Kills the evaluation's whole process group; the group id equals the session leader's pid"""
    with contextlib.suppress(ProcessLookupError, PermissionError):
        os.killpg(pid, signal.SIGKILL)


async def execute_with_timeout(
    script_text: str,
    launcher_args: str,
    timeout: float,
    penalty: float,
    metric: MetricSpec,
    *,
    workdir: Path,
    pre_command: Optional[str] = None,
    direction: Optional[Direction] = None,
) -> EvaluationOutcome:
    """
    Runs a rendered script in its own session under `workdir` and turns the result into an outcome.

    The launcher arguments are passed to the script in the TUNER_LAUNCHER_ARGS environment variable
    since evaluations run locally. On timeout the process group is killed; descendants left behind by
    a finished script are killed as well.

    Args:
        script_text: Rendered script, run with bash.
        launcher_args: Rendered launcher argument string.
        timeout: Wall-clock limit in seconds.
        penalty: Objective recorded for failures, and for timeouts of maximize metrics.
        metric: How to read the objective.
        workdir: Evaluation directory receiving the script, stdout.log and stderr.log.
        pre_command: Optional rendered compile step run before the script.
        direction: Campaign direction when it differs from the metric's own.
    Returns:
        The outcome; spawn errors and unparseable output become status fail.
    """
    if not timeout > 0:
        raise ValueError(f'timeout must be positive, got {timeout}')
    direction = direction or metric.direction
    workdir = anyio.Path(workdir)
    await workdir.mkdir(parents=True, exist_ok=True)
    await (workdir / SCRIPT_FILE_NAME).write_text(script_text)
    command = ['bash', SCRIPT_FILE_NAME] if pre_command is None else ['bash', '-c', f'{pre_command} && exec bash {SCRIPT_FILE_NAME}']
    env = {**os.environ, LAUNCHER_ARGS_ENV: launcher_args}

    started = time.perf_counter()
    with open(workdir / STDOUT_FILE_NAME, 'wb') as stdout, open(workdir / STDERR_FILE_NAME, 'wb') as stderr:
        try:
            process = await anyio.open_process(command, stdin=subprocess.DEVNULL, stdout=stdout, stderr=stderr, cwd=str(workdir), env=env, start_new_session=True)
        except OSError as error:
            return failure_outcome(penalty, time.perf_counter() - started, f'spawn failed: {error}')
        try:
            with anyio.move_on_after(timeout) as scope:
                await process.wait()
        finally:
            kill_process_tree(process.pid)
            if process.returncode is None:
                with anyio.move_on_after(config.DEFAULT_KILL_GRACE_SEC, shield=True):
                    await process.wait()
    elapsed = time.perf_counter() - started

    if scope.cancelled_caught:
        return timeout_outcome(timeout, penalty, direction, elapsed)
    if process.returncode != 0:
        return failure_outcome(penalty, elapsed, f'exit status {process.returncode}')

    stdout_text = await (workdir / STDOUT_FILE_NAME).read_text(errors='replace')
    metrics_path = workdir / metric.path
    metrics_text = await metrics_path.read_text() if metric.source == MetricSource.METRICS_FILE and await metrics_path.exists() else None
    try:
        objective = parse_objective(metric, stdout_text, elapsed, metrics_text)
    except ValueError as error:
        return failure_outcome(penalty, elapsed, str(error))
    if not math.isfinite(objective):
        return failure_outcome(penalty, elapsed, f'non-finite objective {objective}')
    return EvaluationOutcome(objective=objective, status=EvalStatus.OK, elapsed=elapsed)


class MoldEvaluator:
    """Renders the code mold per configuration and runs it in `<output_dir>/evals/<eval_id>/`"""

    def __init__(self, space: ParameterSpace, mold: CodeMold, metric: MetricSpec, timeout: float, penalty: float, output_dir: Path, direction: Direction = None) -> None:
        check_mold(space, mold)
        self.space = space
        self.mold = mold
        self.metric = metric
        self.timeout = timeout
        self.penalty = penalty
        self.output_dir = Path(output_dir)
        self.direction = direction or metric.direction

    def workdir(self, eval_id: int) -> Path:
        return self.output_dir / config.EVALS_DIR_NAME / str(eval_id)

    def command_line(self, cfg: Configuration, eval_id: int) -> str:
        return command_line(self.mold, render_mold(self.mold, cfg), self.workdir(eval_id) / SCRIPT_FILE_NAME)

    async def evaluate(self, cfg: Configuration, eval_id: int) -> EvaluationOutcome:
        rendered = render_mold(self.mold, cfg)
        workdir = self.workdir(eval_id)
        logger.bind(eval_id=eval_id).debug(f'launch: {command_line(self.mold, rendered, workdir / SCRIPT_FILE_NAME)}')
        return await execute_with_timeout(
            rendered.script_text,
            rendered.launcher_args,
            self.timeout,
            self.penalty,
            self.metric,
            workdir=workdir,
            pre_command=rendered.pre_command,
            direction=self.direction,
        )
