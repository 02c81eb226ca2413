import math
import re
from typing import Any, Optional, Union

from pydantic import Field, field_validator, model_validator

from app.server.config import config
from app.server.models.generic import BaseModel, DictType, FrozenModel
from app.server.models.optimizer import OptimizerSettings
from app.server.models.surrogate import ForestParams
from app.server.static import constants, localization
from app.server.static.enums import Direction, MetricKind, MetricSource


class CampaignConfig(BaseModel):
    """Every user-set campaign knob; unset optional knobs resolve from the others"""

    n_workers: int = Field(default=config.DEFAULT_N_WORKERS, ge=1)
    max_evals: int = Field(default=config.DEFAULT_MAX_EVALS, ge=1)
    eval_timeout: float = Field(gt=0)
    kappa: float = Field(default=config.DEFAULT_KAPPA, ge=0)
    n_initial: Optional[int] = Field(default=None, ge=1)
    candidate_pool_size: int = Field(default=config.DEFAULT_CANDIDATE_POOL_SIZE, ge=1)
    seed: int = config.DEFAULT_SEED
    direction: Direction = Direction.MINIMIZE
    timeout_penalty: Optional[float] = None
    metric_name: str = 'objective'
    wall_clock_budget: Optional[float] = Field(default=None, gt=0)
    start_from_default: bool = True
    n_trees: int = Field(default=config.DEFAULT_N_TREES, ge=1)
    min_samples_split: int = Field(default=config.DEFAULT_MIN_SAMPLES_SPLIT, ge=2)
    max_depth: Optional[int] = Field(default=None, ge=0)
    bootstrap: bool = True
    worker_labels: list[str] = []

    @model_validator(mode='after')
    def check_workers(self) -> 'CampaignConfig':
        if self.n_workers > self.max_evals:
            raise ValueError(f'n_workers ({self.n_workers}) must not exceed max_evals ({self.max_evals})')
        if self.timeout_penalty is not None and not math.isfinite(self.timeout_penalty):
            raise ValueError('timeout_penalty must be finite')
        return self

    @property
    def initial_samples(self) -> int:
        return self.n_initial if self.n_initial is not None else max(2 * self.n_workers, 8)

    @property
    def penalty(self) -> float:
        """Objective recorded for failures (and timeouts of maximize metrics)"""
        if self.timeout_penalty is not None:
            return self.timeout_penalty
        return config.DEFAULT_MAX_PENALTY if self.direction == Direction.MAXIMIZE else self.eval_timeout

    def worker_label(self, worker_id: int) -> str:
        return self.worker_labels[worker_id] if worker_id < len(self.worker_labels) else f'local-{worker_id}'

    def optimizer_settings(self) -> OptimizerSettings:
        return OptimizerSettings(
            kappa=self.kappa,
            n_initial=self.initial_samples,
            candidate_pool_size=self.candidate_pool_size,
            seed=self.seed,
            direction=self.direction,
            start_from_default=self.start_from_default,
            forest=ForestParams(n_trees=self.n_trees, min_samples_split=self.min_samples_split, max_depth=self.max_depth, bootstrap=self.bootstrap),
        )


class MetricSpec(FrozenModel):
    """Where the objective comes from and what it means; the direction follows from the kind"""

    kind: MetricKind = MetricKind.FOM
    source: MetricSource = MetricSource.STDOUT_REGEX
    pattern: Optional[str] = None
    path: str = 'metrics.txt'
    fields: list[str] = ['package_energy_j', 'dram_energy_j']
    runtime_pattern: Optional[str] = None

    @field_validator('pattern', 'runtime_pattern')
    @classmethod
    def check_pattern(cls, value: Optional[str]) -> Optional[str]:
        if value is None:
            return value
        try:
            compiled = re.compile(value)
        except re.error as error:
            raise ValueError(f'pattern does not compile: {error}') from error
        if compiled.groups != 1:
            raise ValueError('pattern must have exactly one capture group')
        return value

    @model_validator(mode='after')
    def check_source(self) -> 'MetricSpec':
        if self.source == MetricSource.STDOUT_REGEX and self.pattern is None:
            raise ValueError('stdout_regex metrics need a pattern')
        if self.kind in (MetricKind.ENERGY, MetricKind.EDP):
            if self.source != MetricSource.METRICS_FILE:
                raise ValueError(f'{self.kind.value} metrics are read from a metrics_file')
            if len(self.fields) != 2:
                raise ValueError('metrics_file fields must name the package and dram energy columns')
        if self.source == MetricSource.WALL_TIME and self.kind != MetricKind.RUNTIME:
            raise ValueError('wall_time source only measures runtime metrics')
        return self

    @property
    def direction(self) -> Direction:
        return self.kind.direction


class CodeMold(FrozenModel):
    """Script and launcher templates with `#Pk` placeholders"""

    template_text: str
    launcher_template: str = ''
    launcher_command: str = config.DEFAULT_LAUNCHER
    pre_command: Optional[str] = None


class RenderedMold(FrozenModel):
    script_text: str
    launcher_args: str
    pre_command: Optional[str] = None


class BaselineSpec(FrozenModel):
    objective: float
    provenance: str = ''
    direction: Direction = Direction.MAXIMIZE
    # wall time of the kept run when measured by the tool itself
    runtime: Optional[float] = Field(default=None, ge=0)

    @field_validator('objective')
    @classmethod
    def check_finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError('baseline objective must be finite')
        return value


class MoldFile(BaseModel):
    script: str
    launcher: str = ''
    launcher_command: str = config.DEFAULT_LAUNCHER
    pre_command: Optional[str] = None


class SyntheticOptions(FrozenModel):
    """Knobs of a `synthetic:<name>` evaluator that override the canned objective"""

    sleep: Optional[float] = Field(default=None, ge=0)
    noise_std: Optional[float] = Field(default=None, ge=0)


class CampaignFile(BaseModel):
    """The campaign document as written by the user, before paths are resolved"""

    space: Optional[Union[str, DictType]] = None
    evaluator: str = constants.MOLD_EVALUATOR
    synthetic: SyntheticOptions = SyntheticOptions()
    mold: Optional[MoldFile] = None
    metric: Optional[MetricSpec] = None
    campaign: DictType = {}
    baseline: Optional[BaselineSpec] = None
    output_dir: str = '.'

    @model_validator(mode='after')
    def check_evaluator(self) -> 'CampaignFile':
        if self.evaluator == constants.MOLD_EVALUATOR:
            if self.space is None:
                raise ValueError('space is required when evaluator is "mold"')
            if self.mold is None:
                raise ValueError(localization.EXCEPTION_MOLD_MISSING)
            if self.metric is None:
                raise ValueError(localization.EXCEPTION_METRIC_MISSING)
        elif not self.evaluator.startswith(constants.SYNTHETIC_PREFIX):
            raise ValueError(f'{localization.EXCEPTION_UNKNOWN_EVALUATOR}: {self.evaluator!r}')
        return self

    def campaign_settings(self, overrides: dict[str, Any] = None) -> dict[str, Any]:
        """File values with flag overrides on top; the metric decides the direction unless one is set"""
        settings = dict(self.campaign)
        if self.metric is not None:
            settings.setdefault('direction', self.metric.direction.value)
            settings.setdefault('metric_name', self.metric.kind.value)
        settings.update(overrides or {})
        return settings
