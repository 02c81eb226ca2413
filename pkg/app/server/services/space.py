import math
from collections.abc import Iterator
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from app.server.models.generic import DictType, MaybeValue, ParamValue
from app.server.models.space import Configuration, OrdinalSpec, ParameterSpace, UniformIntSpec
from app.server.static import constants
from app.server.utils import schema_loader


def sample(space: ParameterSpace, rng: np.random.Generator) -> Configuration:
    """
    Draws one configuration uniformly per active parameter.

    Parameters are visited parents-first so a child is only drawn when its condition holds;
    inactive children consume no randomness. UniformInteger values are drawn over the
    quantization lattice, so they can never exceed `upper`.

    Args:
        space: A well-formed parameter space.
        rng: The caller's seeded random source; equal seeds give equal sequences.
    Returns:
        A Configuration satisfying every invariant of the space.
    """
    assigned: dict[str, MaybeValue] = {}
    for name in space.activation_order:
        if not space.is_active(name, assigned):
            assigned[name] = None
            continue
        spec = space.spec(name)
        step = int(rng.integers(spec.cardinality))
        if isinstance(spec, UniformIntSpec):
            assigned[name] = spec.value_at(step)
        elif isinstance(spec, OrdinalSpec):
            assigned[name] = spec.sequence[step]
        else:
            assigned[name] = spec.choices[step]
    return Configuration.model_construct(values={name: assigned[name] for name in space.names})


def validate(space: ParameterSpace, cfg: Configuration) -> Optional[str]:
    """
    Checks a configuration against the space.

    Returns:
        None when the configuration is valid, else a description naming the first violated parameter and rule.
    """
    for name in cfg.values:
        try:
            space.spec(name)
        except KeyError:
            return f'{name}: unknown parameter'
    for name in space.names:
        if name not in cfg.values:
            return f'{name}: missing parameter'

    for name in space.names:
        value = cfg.values[name]
        active = space.is_active(name, cfg.values)
        condition = space.condition_of(name)
        if not active:
            if value is not None:
                return f'{name}: must be Inactive because {condition.parent} != {condition.equals!r}'
            continue
        if value is None:
            if condition is not None:
                return f'{name}: must be active because {condition.parent} == {condition.equals!r}'
            return f'{name}: unconditioned parameter cannot be Inactive'
        if violation := space.spec(name).violation(value):
            return violation
    return None


def encode(space: ParameterSpace, cfg: Configuration) -> np.ndarray:
    """
    Maps a valid configuration to a fixed-length float vector in space order.

    Categorical and Ordinal values become their 0-based position, UniformInteger values stay raw,
    and Inactive becomes -1 so trees can split actives from inactives.

    Raises:
        ValueError: If the configuration does not validate.
    """
    if violation := validate(space, cfg):
        raise ValueError(f'cannot encode invalid configuration: {violation}')
    return _encode_unchecked(space, cfg)


def encode_many(space: ParameterSpace, cfgs: list[Configuration]) -> np.ndarray:
    """Encodes configurations produced by `sample` or already validated, one row each"""
    if not cfgs:
        return np.empty((0, len(space.parameters)), dtype=np.float64)
    return np.vstack([_encode_unchecked(space, cfg) for cfg in cfgs])


def _encode_unchecked(space: ParameterSpace, cfg: Configuration) -> np.ndarray:
    vector = np.empty(len(space.parameters), dtype=np.float64)
    for position, spec in enumerate(space.parameters):
        value = cfg.values[spec.name]
        if value is None:
            vector[position] = constants.INACTIVE_SENTINEL
        elif isinstance(spec, UniformIntSpec):
            vector[position] = float(value)
        else:
            vector[position] = float(spec.index(value))
    return vector


def default_configuration(space: ParameterSpace) -> Configuration:
    """Every parameter at its default; children whose condition fails on the defaults are Inactive"""
    assigned: dict[str, MaybeValue] = {}
    for name in space.activation_order:
        assigned[name] = space.spec(name).default if space.is_active(name, assigned) else None
    return Configuration(values={name: assigned[name] for name in space.names})


def space_size(space: ParameterSpace) -> int:
    """Exact number of distinct valid configurations (an Inactive child counts once)"""

    def subtree(name: str, value: ParamValue) -> int:
        total = 1
        for condition in space.children_of(name):
            total *= sum(subtree(condition.child, child_value) for child_value in space.spec(condition.child).values()) if value == condition.equals else 1
        return total

    roots = [spec for spec in space.parameters if space.condition_of(spec.name) is None]
    return math.prod(sum(subtree(spec.name, value) for value in spec.values()) for spec in roots)


def enumerate_space(space: ParameterSpace) -> Iterator[Configuration]:
    """Yields every valid configuration once, in lexicographic order of the activation order"""
    order = space.activation_order

    def extend(position: int, assigned: dict[str, MaybeValue]) -> Iterator[dict[str, MaybeValue]]:
        if position == len(order):
            yield assigned
            return
        name = order[position]
        options = space.spec(name).values() if space.is_active(name, assigned) else [None]
        for value in options:
            assigned[name] = value
            yield from extend(position + 1, assigned)
        del assigned[name]

    for assigned in extend(0, {}):
        yield Configuration.model_construct(values={name: assigned[name] for name in space.names})


def format_value(value: MaybeValue) -> str:
    """Single text rendering for parameter values; Inactive renders as `nan`"""
    return constants.INACTIVE_LITERAL if value is None else str(value)


def parse_value(space: ParameterSpace, name: str, text: str) -> MaybeValue:
    """Inverse of `format_value` for one parameter of the space"""
    text = text.strip()
    if text == constants.INACTIVE_LITERAL:
        return None
    spec = space.spec(name)
    if isinstance(spec, UniformIntSpec):
        return int(text)
    if isinstance(spec, OrdinalSpec):
        for item in spec.sequence:
            if format_value(item) == text:
                return item
        return float(text)
    return text


def configuration_from_text(space: ParameterSpace, row: dict[str, str]) -> Configuration:
    return Configuration(values={name: parse_value(space, name, row[name]) for name in space.names})


def load_space(source: Union[str, Path, DictType]) -> ParameterSpace:
    """
    Builds a space from its declarative document.

    Args:
        source: Path to a YAML/JSON document, or the already-parsed mapping.
    Returns:
        The validated ParameterSpace.
    """
    document = schema_loader.load(source) if isinstance(source, (str, Path)) else source
    return ParameterSpace.model_validate(document)


def dump_space(space: ParameterSpace) -> dict[str, Any]:
    return space.model_dump(mode='json')
