from typing import Any, Optional, Union

from pydantic import BaseModel as PydanticBaseModel
from pydantic import ConfigDict

ParamValue = Union[str, int, float]
# None is the in-memory form of an Inactive parameter
MaybeValue = Optional[ParamValue]
DictType = dict[str, Any]


class BaseModel(PydanticBaseModel):
    """Base class for model with predefined Config"""

    model_config = ConfigDict(arbitrary_types_allowed=True, str_strip_whitespace=True, extra='forbid')


class FrozenModel(BaseModel):
    """Base class for immutable value objects shared across workers"""

    model_config = ConfigDict(arbitrary_types_allowed=True, str_strip_whitespace=True, extra='forbid', frozen=True)
