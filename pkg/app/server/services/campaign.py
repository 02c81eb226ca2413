from pathlib import Path
from typing import Any, Optional, Union

import anyio
import numpy as np

from app.server.config import config
from app.server.handler.exceptions import InvalidInputError
from app.server.logger.custom_logger import logger
from app.server.models.campaign import BaselineSpec, CampaignConfig, CampaignFile, CodeMold, MetricSpec
from app.server.models.generic import BaseModel, DictType
from app.server.models.record import CampaignResult, EvaluationRecord, TracePoint
from app.server.models.space import Configuration, ParameterSpace
from app.server.services import ensemble
from app.server.services import harness
from app.server.services import space as space_service
from app.server.services import store as store_service
from app.server.services import synthbench
from app.server.services.harness import Evaluator, MoldEvaluator
from app.server.services.optimizer import Optimizer
from app.server.services.synthbench import SyntheticEvaluator, SyntheticObjective
from app.server.static import constants, localization
from app.server.static.enums import Direction
from app.server.utils import json_utils, schema_loader


class LoadedCampaign(BaseModel):
    """A campaign file with its paths resolved, its space loaded and its settings merged"""

    path: Path
    document: CampaignFile
    space: ParameterSpace
    config: CampaignConfig
    output_dir: Path
    mold: Optional[CodeMold] = None
    metric: Optional[MetricSpec] = None
    objective: Optional[SyntheticObjective] = None
    baseline: Optional[BaselineSpec] = None

    @property
    def results_path(self) -> Path:
        return self.output_dir / config.RESULTS_FILE_NAME

    @property
    def trace_path(self) -> Path:
        return self.output_dir / config.TRACE_FILE_NAME


def _resolve(base_dir: Path, path: Union[str, Path]) -> Path:
    path = Path(path).expanduser()
    return path if path.is_absolute() else base_dir / path


def load_campaign(path: Union[str, Path], overrides: DictType = None, defaults: DictType = None, output_dir: Optional[Path] = None) -> LoadedCampaign:
    """
    Reads a campaign file and everything it references.

    Settings precedence is overrides (CLI flags) > file > defaults > built-in defaults; None-valued
    overrides count as unset. Relative paths resolve against the campaign file's directory.

    Raises:
        InvalidInputError: If the file or a referenced file is missing or unreadable.
        EvaluatorSetupError: For unknown synthetic objectives or placeholders naming unknown parameters.
        ValidationError: If a document violates its schema.
    """
    path = Path(path)
    document = CampaignFile.model_validate(schema_loader.load(path) or {})
    base_dir = path.parent
    settings: dict[str, Any] = dict(defaults or {})
    mold = metric = objective = None

    if document.evaluator.startswith(constants.SYNTHETIC_PREFIX):
        objective = synthbench.get_objective(document.evaluator[len(constants.SYNTHETIC_PREFIX) :], document.synthetic.sleep, document.synthetic.noise_std)
        space = objective.space
        if document.space is not None and space_service.dump_space(_load_space(base_dir, document.space)) != space_service.dump_space(space):
            raise InvalidInputError(localization.EXCEPTION_SYNTHETIC_SPACE)
        settings.update(direction=objective.direction.value, metric_name=objective.name)
    else:
        space = _load_space(base_dir, document.space)
        script_path = _resolve(base_dir, document.mold.script)
        if not script_path.is_file():
            raise InvalidInputError(f'{localization.EXCEPTION_FILE_NOT_FOUND}: {script_path}')
        mold = CodeMold(
            template_text=script_path.read_text(encoding='utf-8'),
            launcher_template=document.mold.launcher,
            launcher_command=document.mold.launcher_command,
            pre_command=document.mold.pre_command,
        )
        harness.check_mold(space, mold)
        metric = document.metric

    if document.baseline is not None and document.baseline.runtime:
        settings['eval_timeout'] = harness.default_timeout(document.baseline.runtime)
    settings.update(document.campaign_settings(json_utils.filter_none(overrides or {})))
    campaign = CampaignConfig.model_validate(settings)

    baseline = document.baseline
    if baseline is not None and 'direction' not in baseline.model_fields_set:
        baseline = baseline.model_copy(update={'direction': campaign.direction})

    return LoadedCampaign(
        path=path,
        document=document,
        space=space,
        config=campaign,
        output_dir=Path(output_dir) if output_dir is not None else _resolve(base_dir, document.output_dir),
        mold=mold,
        metric=metric,
        objective=objective,
        baseline=baseline,
    )


def _load_space(base_dir: Path, source: Union[str, DictType]) -> ParameterSpace:
    return space_service.load_space(_resolve(base_dir, source) if isinstance(source, str) else source)


def build_evaluator(loaded: LoadedCampaign, output_dir: Optional[Path] = None) -> Evaluator:
    campaign = loaded.config
    if loaded.objective is not None:
        return SyntheticEvaluator(loaded.objective, campaign.eval_timeout, campaign.penalty, campaign.seed, campaign.direction)
    return MoldEvaluator(loaded.space, loaded.mold, loaded.metric, campaign.eval_timeout, campaign.penalty, output_dir or loaded.output_dir, campaign.direction)


class CampaignService:
    """What the CLI commands do, one method per command"""

    def run(self, loaded: LoadedCampaign, resume: bool = False, reproducible_timestamps: bool = False) -> CampaignResult:
        """
        Runs the campaign into `<output_dir>/results.csv` and writes the trace next to it.

        Raises:
            InvalidInputError: If results already exist and resume is off.
            CampaignAbortedError: When the campaign aborts; the partial results stay on disk.
        """
        results_path = loaded.results_path
        prior: list[EvaluationRecord] = []
        if results_path.exists() and results_path.stat().st_size > 0:
            if not resume:
                raise InvalidInputError(f'{localization.EXCEPTION_RESULTS_EXIST}: {results_path}')
            prior = store_service.read_records(results_path, loaded.space)

        evaluator = build_evaluator(loaded)
        with store_service.ResultsStore(results_path, loaded.space, reproducible_timestamps) as store:
            result = anyio.run(ensemble.run_campaign, loaded.space, evaluator, loaded.config, store, prior)
        self.write_trace(prior + result.records, loaded.trace_path, loaded.baseline)
        return result

    def dry_run(self, loaded: LoadedCampaign) -> list[str]:
        """Renders the initial batch without executing or recording anything"""
        optimizer = Optimizer(loaded.space, loaded.config.optimizer_settings())
        lines = []
        for eval_id in range(loaded.config.n_workers):
            cfg = optimizer.ask()
            if loaded.mold is not None:
                rendered = harness.render_mold(loaded.mold, cfg)
                script_path = loaded.output_dir / config.EVALS_DIR_NAME / str(eval_id) / harness.SCRIPT_FILE_NAME
                lines.append(f'# eval {eval_id}: {format_configuration(cfg)}')
                if rendered.pre_command:
                    lines.append(rendered.pre_command)
                lines.append(harness.command_line(loaded.mold, rendered, script_path))
            else:
                lines.append(f'# eval {eval_id}: {format_configuration(cfg)}')
        return lines

    def baseline(self, loaded: LoadedCampaign, repeats: int) -> BaselineSpec:
        evaluator = build_evaluator(loaded, loaded.output_dir / 'baseline')
        return anyio.run(ensemble.measure_baseline, loaded.space, evaluator, repeats, loaded.config.direction)

    def write_trace(self, records: list[EvaluationRecord], path: Path, baseline: Optional[BaselineSpec] = None) -> list[TracePoint]:
        series = store_service.export_trace(records, baseline)
        store_service.write_trace(path, series)
        logger.debug(f'wrote {len(series)} trace rows to {path}')
        return series

    def sample(self, space: ParameterSpace, n: int, seed: int) -> list[Configuration]:
        rng = np.random.default_rng(seed)
        return [space_service.sample(space, rng) for _ in range(n)]

    def validate_document(self, path: Path) -> str:
        """
        Validates a space or campaign document and describes it.

        Raises:
            InvalidInputError, EvaluatorSetupError or ValidationError on the first violation.
        """
        document = schema_loader.load(path)
        if isinstance(document, dict) and 'parameters' in document:
            space = space_service.load_space(document)
            return f'space with {len(space.parameters)} parameters and {space_service.space_size(space)} configurations'
        loaded = load_campaign(path)
        return f'campaign: {loaded.document.evaluator} evaluator, {loaded.config.max_evals} evaluations on {loaded.config.n_workers} workers, direction {loaded.config.direction.value}'


def format_configuration(cfg: Configuration) -> str:
    return ' '.join(f'{name}={space_service.format_value(value)}' for name, value in cfg.values.items())


def resolve_direction(direction: Optional[Direction], campaign_path: Optional[Path]) -> tuple[Direction, Optional[BaselineSpec]]:
    """Direction and configured baseline for commands that only see a results file"""
    if campaign_path is not None:
        loaded = load_campaign(campaign_path, overrides={'direction': direction}, defaults={'eval_timeout': config.DEFAULT_BASELINE_TIMEOUT})
        return loaded.config.direction, loaded.baseline
    if direction is None:
        raise InvalidInputError(localization.EXCEPTION_DIRECTION_MISSING)
    return direction, None
