"""
Synthetic objectives over OpenMC-shaped conditional spaces.

They let campaigns run at desk scale: evaluation is a closed-form response surface plus optional
Gaussian noise and an optional sleep that stands in for application runtime.
"""

import math
import time
from collections.abc import Callable
from typing import Optional

import anyio
import numpy as np
from pydantic import Field

from app.server.handler.exceptions import EvaluatorSetupError
from app.server.models.generic import FrozenModel, MaybeValue
from app.server.models.record import EvaluationOutcome
from app.server.models.space import Configuration, OrdinalSpec, ParameterSpace, UniformIntSpec
from app.server.services import space as space_service
from app.server.services.harness import timeout_outcome
from app.server.static import localization
from app.server.static.enums import Direction, EvalStatus

OPENMC_SPACE = {
    'parameters': [
        {'name': 'P0', 'type': 'categorical', 'choices': ['openmc', 'openmc-queueless'], 'default': 'openmc'},
        {'name': 'P1', 'type': 'uniform_int', 'lower': 100000, 'upper': 8000000, 'quantum': 1000, 'default': 1000000},
        {'name': 'P2', 'type': 'uniform_int', 'lower': 100, 'upper': 100000, 'quantum': 100, 'default': 4000},
        {'name': 'P3', 'type': 'uniform_int', 'lower': 0, 'upper': 1000000, 'quantum': 1000, 'default': 20000},
        {'name': 'P4', 'type': 'uniform_int', 'lower': 2, 'upper': 8, 'quantum': 1, 'default': 8},
        {'name': 'P5', 'type': 'ordinal', 'sequence': [1, 2], 'default': 1},
        {'name': 'P6', 'type': 'categorical', 'choices': ['cores', 'threads', 'sockets'], 'default': 'threads'},
    ],
    'conditions': [{'child': 'P3', 'parent': 'P0', 'equals': 'openmc'}],
}

# same shape as the OpenMC space (mode, tasks per GPU, particles in flight, gated sorting threshold) on a coarse lattice
OPENMC_LIKE_SPACE = {
    'parameters': [
        {'name': 'P0', 'type': 'categorical', 'choices': ['openmc', 'openmc-queueless'], 'default': 'openmc'},
        {'name': 'P1', 'type': 'uniform_int', 'lower': 100000, 'upper': 8000000, 'quantum': 100000, 'default': 1000000},
        {'name': 'P3', 'type': 'uniform_int', 'lower': 0, 'upper': 1000000, 'quantum': 50000, 'default': 0},
        {'name': 'P5', 'type': 'ordinal', 'sequence': [1, 2], 'default': 1},
    ],
    'conditions': [{'child': 'P3', 'parent': 'P0', 'equals': 'openmc'}],
}


def openmc_space() -> ParameterSpace:
    return ParameterSpace.model_validate(OPENMC_SPACE)


def openmc_like_space() -> ParameterSpace:
    return ParameterSpace.model_validate(OPENMC_LIKE_SPACE)


class ConditionalTerm(FrozenModel):
    """Quadratic contribution of a conditioned child, counted only while the child is active"""

    child: str
    weight: float = Field(ge=0)
    optimum: float


class SyntheticObjective(FrozenModel):
    """
    Separable response surface over a parameter space.

    The loss is the weighted squared distance of every numeric parameter's normalized value from its
    optimum, plus per-choice offsets of categorical parameters, plus the conditional term. Minimize
    objectives report the loss; maximize objectives report `scale / (1 + loss)`, a FoM-like throughput.
    """

    name: str
    space: ParameterSpace
    weights: dict[str, float]
    optima: dict[str, float]
    categorical_offsets: dict[str, dict[str, float]] = {}
    conditional_term: Optional[ConditionalTerm] = None
    noise_std: float = Field(default=0.0, ge=0)
    sleep: float = Field(default=0.0, ge=0)
    direction: Direction = Direction.MINIMIZE
    scale: float = Field(default=1.0, gt=0)


def normalize(space: ParameterSpace, name: str, value: MaybeValue) -> float:
    """Position of a numeric value within its parameter's range, in [0, 1]"""
    spec = space.spec(name)
    if isinstance(spec, UniformIntSpec):
        return 0.0 if spec.upper == spec.lower else (value - spec.lower) / (spec.upper - spec.lower)
    if isinstance(spec, OrdinalSpec):
        return 0.0 if spec.cardinality == 1 else spec.index(value) / (spec.cardinality - 1)
    raise ValueError(f'{name}: categorical parameters have no numeric position')


def synthetic_loss(obj: SyntheticObjective, cfg: Configuration) -> float:
    values = cfg.values
    loss = 0.0
    for name, weight in obj.weights.items():
        if values[name] is not None:
            loss += weight * (normalize(obj.space, name, values[name]) - obj.optima[name]) ** 2
    for name, offsets in obj.categorical_offsets.items():
        if values[name] is not None:
            loss += offsets.get(values[name], 0.0)
    term = obj.conditional_term
    if term is not None and values[term.child] is not None:
        loss += term.weight * (normalize(obj.space, term.child, values[term.child]) - term.optimum) ** 2
    return loss


def evaluate_synthetic(obj: SyntheticObjective, cfg: Configuration, rng: np.random.Generator = None) -> float:
    """
    Value of the objective at cfg, with Gaussian noise drawn from rng when noise_std > 0.

    The sleep is applied by SyntheticEvaluator, so this stays a pure function.

    Raises:
        ValueError: If cfg is not valid for the objective's space.
    """
    if violation := space_service.validate(obj.space, cfg):
        raise ValueError(f'invalid configuration: {violation}')
    loss = synthetic_loss(obj, cfg)
    value = loss if obj.direction == Direction.MINIMIZE else obj.scale / (1.0 + loss)
    if obj.noise_std > 0:
        rng = rng if rng is not None else np.random.default_rng()
        value += float(rng.normal(0.0, obj.noise_std))
    return value


def noise_rng(seed: int, eval_id: int) -> np.random.Generator:
    """Noise stream of one evaluation; reruns with the same campaign seed reproduce it exactly"""
    return np.random.default_rng([seed, eval_id])


def openmc_like_objective() -> SyntheticObjective:
    return SyntheticObjective(
        name='openmc-like',
        space=openmc_like_space(),
        weights={'P1': 4.0, 'P5': 0.5},
        optima={'P1': 0.62, 'P5': 1.0},
        categorical_offsets={'P0': {'openmc': 0.0, 'openmc-queueless': 0.35}},
        conditional_term=ConditionalTerm(child='P3', weight=2.0, optimum=0.3),
    )


def openmc_objective() -> SyntheticObjective:
    return SyntheticObjective(
        name='openmc',
        space=openmc_space(),
        weights={'P1': 3.0, 'P2': 1.5, 'P4': 0.6, 'P5': 0.4},
        optima={'P1': 0.45, 'P2': 0.7, 'P4': 0.5, 'P5': 1.0},
        categorical_offsets={'P0': {'openmc': 0.0, 'openmc-queueless': 0.12}, 'P6': {'cores': 0.05, 'threads': 0.0, 'sockets': 0.2}},
        conditional_term=ConditionalTerm(child='P3', weight=1.0, optimum=0.15),
        direction=Direction.MAXIMIZE,
        scale=930078.0,
    )


SYNTHETIC_OBJECTIVES: dict[str, Callable[[], SyntheticObjective]] = {
    'openmc-like': openmc_like_objective,
    'openmc': openmc_objective,
}


def get_objective(name: str, sleep: Optional[float] = None, noise_std: Optional[float] = None) -> SyntheticObjective:
    """
    Raises:
        EvaluatorSetupError: If no objective is registered under name.
    """
    if name not in SYNTHETIC_OBJECTIVES:
        raise EvaluatorSetupError(f'{localization.EXCEPTION_UNKNOWN_SYNTHETIC}: {name!r} (known: {", ".join(SYNTHETIC_OBJECTIVES)})')
    obj = SYNTHETIC_OBJECTIVES[name]()
    overrides = {key: value for key, value in (('sleep', sleep), ('noise_std', noise_std)) if value is not None}
    return obj.model_copy(update=overrides) if overrides else obj


def exhaustive_values(obj: SyntheticObjective) -> np.ndarray:
    """Noise-free objective over the whole space, in enumeration order"""
    noiseless = obj.model_copy(update={'noise_std': 0.0})
    return np.array([evaluate_synthetic(noiseless, cfg) for cfg in space_service.enumerate_space(obj.space)])


def random_search_best(obj: SyntheticObjective, budget: int, seed: int) -> float:
    """Best noise-free value of `budget` distinct random samples; the yardstick for model-based search"""
    rng = np.random.default_rng(seed)
    seen: dict[tuple, float] = {}
    limit = min(budget, space_service.space_size(obj.space))
    while len(seen) < limit:
        cfg = space_service.sample(obj.space, rng)
        seen.setdefault(cfg.key, evaluate_synthetic(obj, cfg))
    values = list(seen.values())
    return min(values) if obj.direction == Direction.MINIMIZE else max(values)


class SyntheticEvaluator:
    """In-process evaluator with the same timeout semantics as mold evaluations"""

    def __init__(self, objective: SyntheticObjective, timeout: float, penalty: float, seed: int, direction: Direction = None) -> None:
        self.objective = objective
        self.timeout = timeout
        self.penalty = penalty
        self.seed = seed
        self.direction = direction or objective.direction

    @property
    def space(self) -> ParameterSpace:
        return self.objective.space

    async def evaluate(self, cfg: Configuration, eval_id: int) -> EvaluationOutcome:
        started = time.perf_counter()
        with anyio.move_on_after(self.timeout) as scope:
            if self.objective.sleep > 0:
                await anyio.sleep(self.objective.sleep)
            value = evaluate_synthetic(self.objective, cfg, noise_rng(self.seed, eval_id))
        elapsed = time.perf_counter() - started
        if scope.cancelled_caught:
            return timeout_outcome(self.timeout, self.penalty, self.direction, elapsed)
        if not math.isfinite(value):
            raise ValueError(f'synthetic objective {self.objective.name} produced {value}')
        return EvaluationOutcome(objective=value, status=EvalStatus.OK, elapsed=elapsed)
