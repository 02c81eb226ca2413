from typing import Any, Optional

import numpy as np
from pydantic import Field, model_validator

from app.server.config import config
from app.server.models.generic import BaseModel, FrozenModel


class ForestParams(FrozenModel):
    n_trees: int = Field(default=config.DEFAULT_N_TREES, ge=1)
    min_samples_split: int = Field(default=config.DEFAULT_MIN_SAMPLES_SPLIT, ge=2)
    max_depth: Optional[int] = Field(default=None, ge=0)
    bootstrap: bool = True


class TrainingSet(BaseModel):
    """Encoded configurations and their objectives in minimize orientation"""

    xs: np.ndarray
    ys: np.ndarray

    @model_validator(mode='before')
    @classmethod
    def coerce_arrays(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        xs, ys = data.get('xs'), data.get('ys')
        if xs is not None and not isinstance(xs, np.ndarray):
            lengths = {len(row) for row in xs}
            if len(lengths) > 1:
                raise ValueError(f'dimension mismatch: encoded vectors have lengths {sorted(lengths)}')
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim == 1 and xs.size == 0:
            xs = xs.reshape(0, 0)
        return {'xs': xs, 'ys': np.asarray(ys, dtype=np.float64)}

    @model_validator(mode='after')
    def check_shapes(self) -> 'TrainingSet':
        if self.xs.ndim != 2:
            raise ValueError('dimension mismatch: xs must be a list of equal-length vectors')
        if self.ys.ndim != 1 or len(self.ys) != len(self.xs):
            raise ValueError(f'xs holds {len(self.xs)} vectors but ys holds {self.ys.size} targets')
        if len(self.ys) == 0:
            raise ValueError('cannot fit a surrogate on empty data')
        if not np.all(np.isfinite(self.ys)):
            raise ValueError('training targets must be finite')
        return self

    @property
    def dimension(self) -> int:
        return self.xs.shape[1]
