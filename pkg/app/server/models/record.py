from typing import Optional

from pydantic import Field, model_validator

from app.server.models.generic import FrozenModel
from app.server.models.space import Configuration
from app.server.static.enums import EvalStatus, StopReason


class EvaluationOutcome(FrozenModel):
    """What an evaluator reports for one configuration"""

    objective: float
    status: EvalStatus
    elapsed: float = Field(ge=0)
    detail: str = ''


class EvaluationRecord(FrozenModel):
    """
    One evaluated configuration. `objective` keeps the user's orientation (never negated);
    times are seconds since campaign start at millisecond precision.
    """

    eval_id: int = Field(ge=0)
    worker_id: int = Field(ge=0)
    config: Configuration
    objective: float
    status: EvalStatus
    elapsed: float = Field(ge=0)
    started_at: float
    finished_at: float

    @model_validator(mode='after')
    def check_times(self) -> 'EvaluationRecord':
        if self.finished_at < self.started_at:
            raise ValueError('finished_at must not precede started_at')
        return self


class ProgressSnapshot(FrozenModel):
    n_done: int
    best_objective: Optional[float] = None
    best_config: Optional[Configuration] = None
    elapsed_total: float
    status_counts: dict[str, int] = {}


class TracePoint(FrozenModel):
    t_sec: float
    objective: float
    status: str


class CampaignResult(FrozenModel):
    records: list[EvaluationRecord]
    stop_reason: StopReason
    elapsed_total: float
