import numpy as np
import pytest
from pydantic import ValidationError

from app.server.models.space import Configuration, ParameterSpace
from app.server.services import space as space_service
from app.server.services import synthbench


def test_samples_of_openmc_space_obey_conditions_and_lattice(openmc_space):
    rng = np.random.default_rng(1234)
    for _ in range(10_000):
        cfg = space_service.sample(openmc_space, rng)
        assert space_service.validate(openmc_space, cfg) is None
        assert (cfg['P3'] is not None) == (cfg['P0'] == 'openmc')
        assert 100000 <= cfg['P1'] <= 8000000
        assert (cfg['P1'] - 100000) % 1000 == 0


def test_equal_seeds_give_equal_sequences(openmc_space):
    first, second = np.random.default_rng(7), np.random.default_rng(7)
    assert [space_service.sample(openmc_space, first) for _ in range(50)] == [space_service.sample(openmc_space, second) for _ in range(50)]


def test_single_choice_space_always_samples_that_choice():
    space = ParameterSpace.model_validate({'parameters': [{'name': 'mode', 'type': 'categorical', 'choices': ['only'], 'default': 'only'}]})
    rng = np.random.default_rng(0)
    assert {space_service.sample(space, rng)['mode'] for _ in range(20)} == {'only'}


def test_quantized_sampling_never_exceeds_upper():
    space = ParameterSpace.model_validate({'parameters': [{'name': 'n', 'type': 'uniform_int', 'lower': 0, 'upper': 10, 'quantum': 4, 'default': 0}]})
    rng = np.random.default_rng(3)
    assert {space_service.sample(space, rng)['n'] for _ in range(200)} == {0, 4, 8}


def test_default_configuration_validates(openmc_space, openmc_defaults):
    assert space_service.default_configuration(openmc_space) == openmc_defaults
    assert space_service.validate(openmc_space, openmc_defaults) is None


def test_active_child_of_unmet_condition_is_a_violation(openmc_space, openmc_defaults):
    cfg = Configuration(values={**openmc_defaults.values, 'P0': 'openmc-queueless'})
    violation = space_service.validate(openmc_space, cfg)
    assert violation.startswith('P3')
    assert 'must be Inactive' in violation


def test_inactive_child_of_met_condition_is_a_violation(openmc_space, openmc_defaults):
    cfg = Configuration(values={**openmc_defaults.values, 'P3': None})
    assert 'must be active' in space_service.validate(openmc_space, cfg)


def test_off_lattice_value_violates_quantization(openmc_space, openmc_defaults):
    cfg = Configuration(values={**openmc_defaults.values, 'P1': 100500})
    violation = space_service.validate(openmc_space, cfg)
    assert violation.startswith('P1')
    assert 'quantization' in violation


def test_out_of_bounds_value_is_a_violation(openmc_space, openmc_defaults):
    cfg = Configuration(values={**openmc_defaults.values, 'P4': 9})
    assert 'outside bounds' in space_service.validate(openmc_space, cfg)


def test_unknown_and_missing_parameters_are_violations(openmc_space, openmc_defaults):
    assert 'unknown parameter' in space_service.validate(openmc_space, Configuration(values={**openmc_defaults.values, 'P9': 1}))
    values = dict(openmc_defaults.values)
    del values['P6']
    assert 'missing parameter' in space_service.validate(openmc_space, Configuration(values=values))


def test_encode_uses_indices_raw_integers_and_sentinel(openmc_space, openmc_defaults):
    vector = space_service.encode(openmc_space, openmc_defaults)
    assert vector.tolist() == [0.0, 1000000.0, 4000.0, 20000.0, 8.0, 0.0, 1.0]

    queueless = Configuration(values={**openmc_defaults.values, 'P0': 'openmc-queueless', 'P3': None, 'P5': 2})
    vector = space_service.encode(openmc_space, queueless)
    assert vector[0] == 1.0
    assert vector[3] == -1.0
    assert vector[5] == 1.0


def test_encode_rejects_invalid_configuration(openmc_space, openmc_defaults):
    with pytest.raises(ValueError, match='quantization'):
        space_service.encode(openmc_space, Configuration(values={**openmc_defaults.values, 'P1': 100500}))


def test_encoded_vectors_share_length(openmc_space):
    rng = np.random.default_rng(11)
    matrix = space_service.encode_many(openmc_space, [space_service.sample(openmc_space, rng) for _ in range(30)])
    assert matrix.shape == (30, 7)


def test_space_size_matches_enumeration():
    objective = synthbench.openmc_like_objective()
    configurations = list(space_service.enumerate_space(objective.space))
    assert space_service.space_size(objective.space) == len(configurations) == 3520
    assert len({cfg.key for cfg in configurations}) == len(configurations)
    assert all(space_service.validate(objective.space, cfg) is None for cfg in configurations[::97])


def test_space_size_of_openmc_space_counts_inactive_once(openmc_space):
    p1, p2, p3, p4 = 7901, 1000, 1001, 7
    assert space_service.space_size(openmc_space) == (p3 + 1) * p1 * p2 * p4 * 2 * 3


@pytest.mark.parametrize(
    'document, message',
    [
        ({'parameters': [{'name': 'a', 'type': 'categorical', 'choices': ['x', 'x'], 'default': 'x'}]}, 'pairwise distinct'),
        ({'parameters': [{'name': 'a', 'type': 'uniform_int', 'lower': 0, 'upper': 10, 'quantum': 3, 'default': 4}]}, 'lattice'),
        ({'parameters': [{'name': 'a', 'type': 'ordinal', 'sequence': [1, 2], 'default': 3}]}, 'not in the sequence'),
        (
            {
                'parameters': [
                    {'name': 'a', 'type': 'categorical', 'choices': ['x', 'y'], 'default': 'x'},
                    {'name': 'b', 'type': 'categorical', 'choices': ['x', 'y'], 'default': 'x'},
                ],
                'conditions': [{'child': 'a', 'parent': 'b', 'equals': 'x'}, {'child': 'b', 'parent': 'a', 'equals': 'x'}],
            },
            'cycle',
        ),
        (
            {'parameters': [{'name': 'a', 'type': 'categorical', 'choices': ['x'], 'default': 'x'}], 'conditions': [{'child': 'a', 'parent': 'a', 'equals': 'x'}]},
            'must differ',
        ),
        (
            {
                'parameters': [
                    {'name': 'a', 'type': 'categorical', 'choices': ['x', 'y'], 'default': 'x'},
                    {'name': 'b', 'type': 'uniform_int', 'lower': 0, 'upper': 3, 'default': 0},
                ],
                'conditions': [{'child': 'b', 'parent': 'a', 'equals': 'z'}],
            },
            'required value is illegal',
        ),
    ],
)
def test_malformed_spaces_are_rejected(document, message):
    with pytest.raises(ValidationError, match=message):
        ParameterSpace.model_validate(document)


def test_space_document_round_trips(openmc_space):
    assert space_service.load_space(space_service.dump_space(openmc_space)) == openmc_space


def test_text_values_parse_back(openmc_space, openmc_defaults):
    row = {name: space_service.format_value(value) for name, value in openmc_defaults.values.items()}
    assert space_service.configuration_from_text(openmc_space, row) == openmc_defaults
    assert space_service.format_value(None) == 'nan'
    assert space_service.parse_value(openmc_space, 'P3', 'nan') is None
