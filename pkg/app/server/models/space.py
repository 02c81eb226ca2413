from numbers import Integral, Real
from typing import Annotated, Literal, Optional, Union

from pydantic import Field, PrivateAttr, model_validator

from app.server.models.generic import FrozenModel, MaybeValue, ParamValue


def _is_int(value) -> bool:
    return isinstance(value, Integral) and not isinstance(value, bool)


def _is_number(value) -> bool:
    return isinstance(value, Real) and not isinstance(value, bool)


class CategoricalSpec(FrozenModel):
    """Unordered choice among string labels"""

    name: str
    type: Literal['categorical'] = 'categorical'
    choices: list[str]
    default: str

    @model_validator(mode='after')
    def check_choices(self) -> 'CategoricalSpec':
        if not self.choices:
            raise ValueError(f'{self.name}: choices must not be empty')
        if len(set(self.choices)) != len(self.choices):
            raise ValueError(f'{self.name}: choices must be pairwise distinct')
        if self.default not in self.choices:
            raise ValueError(f'{self.name}: default {self.default!r} is not among the choices')
        return self

    @property
    def cardinality(self) -> int:
        return len(self.choices)

    def values(self) -> list[ParamValue]:
        return list(self.choices)

    def violation(self, value: ParamValue) -> Optional[str]:
        if not isinstance(value, str) or value not in self.choices:
            return f'{self.name}: {value!r} is not among the choices {self.choices}'
        return None

    def index(self, value: ParamValue) -> int:
        return self.choices.index(value)


class OrdinalSpec(FrozenModel):
    """Ordered sequence of numbers; encoded by position"""

    name: str
    type: Literal['ordinal'] = 'ordinal'
    sequence: list[Union[int, float]]
    default: Union[int, float]

    @model_validator(mode='after')
    def check_sequence(self) -> 'OrdinalSpec':
        if not self.sequence:
            raise ValueError(f'{self.name}: sequence must not be empty')
        if len(set(self.sequence)) != len(self.sequence):
            raise ValueError(f'{self.name}: sequence values must be distinct')
        if self.default not in self.sequence:
            raise ValueError(f'{self.name}: default {self.default!r} is not in the sequence')
        return self

    @property
    def cardinality(self) -> int:
        return len(self.sequence)

    def values(self) -> list[ParamValue]:
        return list(self.sequence)

    def violation(self, value: ParamValue) -> Optional[str]:
        if not _is_number(value) or value not in self.sequence:
            return f'{self.name}: {value!r} is not in the sequence {self.sequence}'
        return None

    def index(self, value: ParamValue) -> int:
        return self.sequence.index(value)


class UniformIntSpec(FrozenModel):
    """Integer range sampled on the lattice lower, lower + quantum, ... (never above upper)"""

    name: str
    type: Literal['uniform_int'] = 'uniform_int'
    lower: int
    upper: int
    quantum: int = Field(default=1, ge=1)
    default: int

    @model_validator(mode='after')
    def check_bounds(self) -> 'UniformIntSpec':
        if self.lower > self.upper:
            raise ValueError(f'{self.name}: lower {self.lower} exceeds upper {self.upper}')
        if not self.lower <= self.default <= self.upper:
            raise ValueError(f'{self.name}: default {self.default} outside [{self.lower}, {self.upper}]')
        if (self.default - self.lower) % self.quantum:
            raise ValueError(f'{self.name}: default {self.default} is not on the quantum {self.quantum} lattice above {self.lower}')
        return self

    @property
    def cardinality(self) -> int:
        return (self.upper - self.lower) // self.quantum + 1

    def value_at(self, step: int) -> int:
        return self.lower + step * self.quantum

    def values(self) -> list[ParamValue]:
        return list(range(self.lower, self.upper + 1, self.quantum))

    def violation(self, value: ParamValue) -> Optional[str]:
        if not _is_int(value):
            return f'{self.name}: {value!r} is not an integer'
        if not self.lower <= value <= self.upper:
            return f'{self.name}: {value} outside bounds [{self.lower}, {self.upper}]'
        if (value - self.lower) % self.quantum:
            return f'{self.name}: {value} violates quantization (lower={self.lower}, quantum={self.quantum})'
        return None


ParameterSpec = Annotated[Union[CategoricalSpec, OrdinalSpec, UniformIntSpec], Field(discriminator='type')]


class ActivationCondition(FrozenModel):
    """`child` is active only while `parent` takes the value `equals`"""

    child: str
    parent: str
    equals: ParamValue


class ParameterSpace(FrozenModel):
    """Ordered parameter specs plus activation conditions. Immutable once validated."""

    parameters: list[ParameterSpec]
    conditions: list[ActivationCondition] = []

    _by_name: dict = PrivateAttr(default_factory=dict)
    _condition_of: dict = PrivateAttr(default_factory=dict)
    _order: tuple = PrivateAttr(default=())

    @model_validator(mode='after')
    def check_structure(self) -> 'ParameterSpace':
        names = [spec.name for spec in self.parameters]
        if not names:
            raise ValueError('space must define at least one parameter')
        if len(set(names)) != len(names):
            raise ValueError('parameter names must be unique')
        by_name = {spec.name: spec for spec in self.parameters}
        condition_of = {}
        for condition in self.conditions:
            if condition.child == condition.parent:
                raise ValueError(f'condition on {condition.child}: child and parent must differ')
            for name in (condition.child, condition.parent):
                if name not in by_name:
                    raise ValueError(f'condition references unknown parameter {name!r}')
            if condition.child in condition_of:
                raise ValueError(f'{condition.child}: at most one condition per child')
            if violation := by_name[condition.parent].violation(condition.equals):
                raise ValueError(f'condition on {condition.child}: required value is illegal ({violation})')
            condition_of[condition.child] = condition
        for name in names:
            seen = {name}
            current = name
            while current in condition_of:
                current = condition_of[current].parent
                if current in seen:
                    raise ValueError(f'condition cycle through {name!r}')
                seen.add(current)
        return self

    def model_post_init(self, __context) -> None:
        self._by_name = {spec.name: spec for spec in self.parameters}
        self._condition_of = {condition.child: condition for condition in self.conditions}
        # runs ahead of check_structure, so cyclic conditions must not recurse here
        order: list[str] = []
        visiting: set[str] = set()

        def visit(name: str) -> None:
            if name in order or name in visiting:
                return
            visiting.add(name)
            if name in self._condition_of:
                visit(self._condition_of[name].parent)
            order.append(name)

        for spec in self.parameters:
            visit(spec.name)
        self._order = tuple(order)

    @property
    def names(self) -> list[str]:
        return [spec.name for spec in self.parameters]

    @property
    def activation_order(self) -> tuple[str, ...]:
        """Parameter names with every parent ahead of its children"""
        return self._order

    def spec(self, name: str):
        return self._by_name[name]

    def condition_of(self, child: str) -> Optional[ActivationCondition]:
        return self._condition_of.get(child)

    def children_of(self, parent: str) -> list[ActivationCondition]:
        return [condition for condition in self.conditions if condition.parent == parent]

    def is_active(self, name: str, assigned: dict[str, MaybeValue]) -> bool:
        """Whether `name` is active given values already assigned to its ancestors"""
        condition = self._condition_of.get(name)
        if condition is None:
            return True
        parent_value = assigned.get(condition.parent)
        return parent_value is not None and parent_value == condition.equals


class Configuration(FrozenModel):
    """One value (None meaning Inactive) per parameter of a space"""

    values: dict[str, MaybeValue]

    def __hash__(self) -> int:
        return hash(self.key)

    def __getitem__(self, name: str) -> MaybeValue:
        return self.values[name]

    @property
    def key(self) -> tuple:
        return tuple(sorted(self.values.items(), key=lambda item: item[0]))
