import math
from typing import Optional, Union

import numpy as np

from app.server.handler.exceptions import SpaceExhaustedError
from app.server.logger.custom_logger import logger
from app.server.models.optimizer import HistoryEntry, OptimizerSettings
from app.server.models.space import Configuration, ParameterSpace
from app.server.models.surrogate import TrainingSet
from app.server.services import space as space_service
from app.server.services.surrogate import SurrogateForest
from app.server.static import localization
from app.server.static.enums import Direction, EvalStatus

ArrayOrScalar = Union[float, np.ndarray]

# spaces up to this size fall back to enumeration once random resampling stops finding unused points
ENUMERATION_LIMIT = 200_000


def lcb(mu: ArrayOrScalar, sigma: ArrayOrScalar, kappa: float) -> ArrayOrScalar:
    """
    Lower confidence bound mu - kappa * sigma; lower is more promising.

    kappa = 0 is pure exploitation; larger kappa rewards uncertain candidates.

    Raises:
        ValueError: On negative sigma or kappa.
    """
    if kappa < 0:
        raise ValueError(f'kappa must be non-negative, got {kappa}')
    if np.any(np.asarray(sigma) < 0):
        raise ValueError('sigma must be non-negative')
    return mu - kappa * sigma


def select_candidate(mu: np.ndarray, sigma: np.ndarray, kappa: float) -> int:
    """Index of the candidate with the lowest LCB; the first one wins ties"""
    return int(np.argmin(lcb(np.asarray(mu, dtype=np.float64), np.asarray(sigma, dtype=np.float64), kappa)))


def to_internal(objective: float, direction: Direction) -> float:
    return -objective if direction == Direction.MAXIMIZE else objective


class Optimizer:
    """
    Ask/tell Bayesian optimizer over a conditional space.

    The first `n_initial` results come from random sampling (optionally starting with the default
    configuration); afterwards each ask fits a random-forest surrogate on the history and returns the
    pool candidate with the lowest LCB. Asks between two tells share one fitted forest.
    Not thread-safe: one owner serializes ask and tell.
    """

    def __init__(self, space: ParameterSpace, settings: OptimizerSettings = None) -> None:
        self.space = space
        self.settings = settings or OptimizerSettings()
        self.history: list[HistoryEntry] = []
        self._in_flight: dict[tuple, Configuration] = {}
        self._told: set[tuple] = set()
        self._rng = np.random.default_rng(self.settings.seed)
        self._model: Optional[SurrogateForest] = None
        self._model_size = -1
        self._size = space_service.space_size(space)

    @property
    def in_flight(self) -> list[Configuration]:
        return list(self._in_flight.values())

    def is_used(self, cfg: Configuration) -> bool:
        return cfg.key in self._in_flight or cfg.key in self._told

    def ask(self) -> Configuration:
        """
        Returns the next configuration to evaluate and marks it in flight.

        Raises:
            SpaceExhaustedError: When every distinct configuration is already told or in flight.
        """
        if len(self._in_flight) + len(self._told) >= self._size:
            raise SpaceExhaustedError(localization.EXCEPTION_SPACE_EXHAUSTED)

        if len(self.history) < self.settings.n_initial:
            cfg = self._initial_point()
        else:
            cfg = self._model_point()

        self._in_flight[cfg.key] = cfg
        return cfg

    def tell(self, cfg: Configuration, objective: float, status: EvalStatus = EvalStatus.OK) -> None:
        """
        Moves an in-flight configuration into the history.

        Args:
            cfg: A configuration previously returned by `ask`.
            objective: Result in the campaign's own orientation; maximize metrics are stored negated.
            status: ok, timeout or fail. Penalized results are learned like any other value.

        Raises:
            ValueError: If cfg is not in flight or the objective is not finite.
        """
        if cfg.key not in self._in_flight:
            raise ValueError('tell called for a configuration that is not in flight')
        if not math.isfinite(objective):
            raise ValueError(f'objective must be finite, got {objective}')
        del self._in_flight[cfg.key]
        self._told.add(cfg.key)
        self.history.append(HistoryEntry(config=cfg, objective=to_internal(objective, self.settings.direction), status=EvalStatus(status)))

    def observe(self, cfg: Configuration, objective: float, status: EvalStatus = EvalStatus.OK) -> None:
        """Adds a result evaluated before this optimizer existed, such as the rows of a resumed campaign"""
        if self.is_used(cfg):
            raise ValueError('configuration was already asked or told')
        self._in_flight[cfg.key] = cfg
        self.tell(cfg, objective, status)

    def incumbent(self) -> Optional[tuple[Configuration, float]]:
        """Best ok result so far, objective in the campaign's own orientation"""
        ok_entries = [entry for entry in self.history if entry.status == EvalStatus.OK]
        if not ok_entries:
            return None
        best = min(ok_entries, key=lambda entry: entry.objective)
        return best.config, to_internal(best.objective, self.settings.direction)

    def surrogate(self) -> SurrogateForest:
        """Forest fitted on the current history, refitted only after new tells"""
        if self._model is None or self._model_size != len(self.history):
            data = TrainingSet(
                xs=space_service.encode_many(self.space, [entry.config for entry in self.history]),
                ys=[entry.objective for entry in self.history],
            )
            self._model = SurrogateForest.fit(data, self.settings.forest, seed=self.settings.seed + len(self.history))
            self._model_size = len(self.history)
        return self._model

    def _initial_point(self) -> Configuration:
        if self.settings.start_from_default and not self.history and not self._in_flight:
            default = space_service.default_configuration(self.space)
            if not self.is_used(default):
                return default
        return self._fresh_sample()

    def _model_point(self) -> Configuration:
        pool: dict[tuple, Configuration] = {}
        for _ in range(self.settings.candidate_pool_size):
            cfg = space_service.sample(self.space, self._rng)
            if not self.is_used(cfg):
                pool.setdefault(cfg.key, cfg)
        if not pool:
            return self._fresh_sample()
        candidates = list(pool.values())
        mu, sigma = self.surrogate().predict_many(space_service.encode_many(self.space, candidates))
        chosen = select_candidate(mu, sigma, self.settings.kappa)
        logger.debug(f'LCB pick among {len(candidates)} candidates: mu={mu[chosen]:.6g} sigma={sigma[chosen]:.6g}')
        return candidates[chosen]

    def _fresh_sample(self) -> Configuration:
        for _ in range(self.settings.sample_retries):
            cfg = space_service.sample(self.space, self._rng)
            if not self.is_used(cfg):
                return cfg
        if self._size <= ENUMERATION_LIMIT:
            unused = [cfg for cfg in space_service.enumerate_space(self.space) if not self.is_used(cfg)]
            if unused:
                return unused[int(self._rng.integers(len(unused)))]
        raise SpaceExhaustedError(localization.EXCEPTION_SPACE_EXHAUSTED)
