from enum import Enum, IntEnum


class Direction(str, Enum):
    MINIMIZE = 'minimize'
    MAXIMIZE = 'maximize'


class EvalStatus(str, Enum):
    OK = 'ok'
    TIMEOUT = 'timeout'
    FAIL = 'fail'


class ParameterType(str, Enum):
    CATEGORICAL = 'categorical'
    ORDINAL = 'ordinal'
    UNIFORM_INT = 'uniform_int'


class MetricKind(str, Enum):
    FOM = 'fom'
    RUNTIME = 'runtime'
    ENERGY = 'energy'
    EDP = 'edp'

    @property
    def direction(self) -> Direction:
        return Direction.MAXIMIZE if self is MetricKind.FOM else Direction.MINIMIZE


class MetricSource(str, Enum):
    STDOUT_REGEX = 'stdout_regex'
    METRICS_FILE = 'metrics_file'
    WALL_TIME = 'wall_time'


class StopReason(str, Enum):
    COMPLETED = 'completed'
    EXHAUSTED = 'exhausted'
    WALL_CLOCK = 'wall_clock'
    ABORTED = 'aborted'


class ExitCode(IntEnum):
    SUCCESS = 0
    INVALID_INPUT = 2
    ABORTED = 3
