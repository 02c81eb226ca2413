from pydantic import Field

from app.server.config import config
from app.server.models.generic import FrozenModel
from app.server.models.space import Configuration
from app.server.models.surrogate import ForestParams
from app.server.static.enums import Direction, EvalStatus


class OptimizerSettings(FrozenModel):
    kappa: float = Field(default=config.DEFAULT_KAPPA, ge=0)
    n_initial: int = Field(default=8, ge=1)
    candidate_pool_size: int = Field(default=config.DEFAULT_CANDIDATE_POOL_SIZE, ge=1)
    seed: int = config.DEFAULT_SEED
    direction: Direction = Direction.MINIMIZE
    start_from_default: bool = True
    sample_retries: int = Field(default=config.DEFAULT_SAMPLE_RETRIES, ge=1)
    forest: ForestParams = ForestParams()


class HistoryEntry(FrozenModel):
    """A told result; `objective` is in minimize orientation (maximize metrics are negated)"""

    config: Configuration
    objective: float
    status: EvalStatus
