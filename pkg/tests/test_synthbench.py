import numpy as np
import pytest

from app.server.handler.exceptions import EvaluatorSetupError
from app.server.models.optimizer import OptimizerSettings
from app.server.models.space import Configuration
from app.server.models.surrogate import ForestParams
from app.server.services import space as space_service
from app.server.services import synthbench
from app.server.services.optimizer import Optimizer
from app.server.static.enums import Direction, EvalStatus

LIKE_OPTIMUM = Configuration(values={'P0': 'openmc', 'P1': 5000000, 'P3': 300000, 'P5': 2})


def test_openmc_like_space_has_expected_size(openmc_like):
    assert space_service.space_size(openmc_like.space) == 3520


def test_loss_is_smallest_at_the_optimum(openmc_like):
    values = synthbench.exhaustive_values(openmc_like)
    configurations = list(space_service.enumerate_space(openmc_like.space))
    assert configurations[int(np.argmin(values))] == LIKE_OPTIMUM
    assert values.min() == pytest.approx(0.0, abs=1e-6)
    assert np.all(values >= 0)


def test_queueless_mode_pays_its_offset(openmc_like):
    queueless = Configuration(values={'P0': 'openmc-queueless', 'P1': 5000000, 'P3': None, 'P5': 2})
    assert synthbench.synthetic_loss(openmc_like, queueless) == pytest.approx(0.35, abs=1e-6)


def test_noise_free_evaluation_is_deterministic(openmc_like, openmc_space, openmc_defaults):
    assert synthbench.evaluate_synthetic(openmc_like, LIKE_OPTIMUM) == synthbench.evaluate_synthetic(openmc_like, LIKE_OPTIMUM)
    fom = synthbench.openmc_objective()
    value = synthbench.evaluate_synthetic(fom, openmc_defaults)
    assert 0 < value <= fom.scale


def test_noise_streams_repeat_per_seed_and_eval_id(openmc_like):
    noisy = openmc_like.model_copy(update={'noise_std': 0.1})
    first = synthbench.evaluate_synthetic(noisy, LIKE_OPTIMUM, synthbench.noise_rng(3, 17))
    again = synthbench.evaluate_synthetic(noisy, LIKE_OPTIMUM, synthbench.noise_rng(3, 17))
    other = synthbench.evaluate_synthetic(noisy, LIKE_OPTIMUM, synthbench.noise_rng(3, 18))
    assert first == again
    assert first != other


def test_invalid_configuration_is_rejected(openmc_like):
    with pytest.raises(ValueError, match='must be Inactive'):
        synthbench.evaluate_synthetic(openmc_like, Configuration(values={**LIKE_OPTIMUM.values, 'P0': 'openmc-queueless'}))


def test_registry_lookup_applies_overrides():
    obj = synthbench.get_objective('openmc', sleep=0.25, noise_std=2.0)
    assert obj.direction == Direction.MAXIMIZE
    assert (obj.sleep, obj.noise_std) == (0.25, 2.0)
    assert synthbench.get_objective('openmc-like').sleep == 0.0


def test_registry_rejects_unknown_names():
    with pytest.raises(EvaluatorSetupError, match='openmc-like'):
        synthbench.get_objective('rosenbrock')


@pytest.mark.anyio
async def test_evaluator_times_out_long_sleeps(openmc_like):
    evaluator = synthbench.SyntheticEvaluator(openmc_like.model_copy(update={'sleep': 5.0}), timeout=0.2, penalty=0.2, seed=1)
    outcome = await evaluator.evaluate(LIKE_OPTIMUM, 0)
    assert outcome.status == EvalStatus.TIMEOUT
    assert outcome.objective == 0.2
    assert outcome.elapsed < 2.0


@pytest.mark.anyio
async def test_evaluator_reports_ok_values(openmc_like):
    evaluator = synthbench.SyntheticEvaluator(openmc_like, timeout=1.0, penalty=1.0, seed=1)
    outcome = await evaluator.evaluate(LIKE_OPTIMUM, 0)
    assert outcome.status == EvalStatus.OK
    assert outcome.objective == synthbench.synthetic_loss(openmc_like, LIKE_OPTIMUM)


def _model_based_best(objective, budget: int, seed: int) -> float:
    settings = OptimizerSettings(n_initial=8, candidate_pool_size=500, seed=seed, forest=ForestParams(n_trees=20))
    optimizer = Optimizer(objective.space, settings)
    for _ in range(budget):
        cfg = optimizer.ask()
        optimizer.tell(cfg, synthbench.evaluate_synthetic(objective, cfg))
    return optimizer.incumbent()[1]


@pytest.mark.slow
def test_model_based_search_reaches_the_top_percentile(openmc_like):
    values = np.sort(synthbench.exhaustive_values(openmc_like))
    top_percentile = values[int(np.ceil(0.01 * len(values))) - 1]
    seeds = range(10)
    model_based = [_model_based_best(openmc_like, 60, seed) for seed in seeds]
    random_search = [synthbench.random_search_best(openmc_like, 60, seed) for seed in seeds]
    assert sum(best <= top_percentile for best in model_based) >= 8
    assert np.median(model_based) <= np.median(random_search)
