import textwrap
from pathlib import Path

import pytest

from app.server.models.campaign import CodeMold, MetricSpec
from app.server.models.space import Configuration, ParameterSpace
from app.server.services import synthbench
from app.server.static.enums import MetricKind, MetricSource
from app.server.utils import schema_loader

OPENMC_MOLD = textwrap.dedent(
    """\
    #!/bin/bash
    pp0="#P0"
    pp="openmc"
    if [ "$pp0" = "$pp" ]
    then
            openmc  --event -i #P1 -b #P2 -m #P3
    else
            openmc-queueless --event -i #P1 -b #P2
    fi
    """
)
OPENMC_LAUNCHER = '-c #P4 --ntasks-per-gpu=#P5 --cpu-bind=#P6'


@pytest.fixture
def anyio_backend() -> str:
    return 'asyncio'


@pytest.fixture
def openmc_space() -> ParameterSpace:
    return synthbench.openmc_space()


@pytest.fixture
def openmc_defaults() -> Configuration:
    return Configuration(values={'P0': 'openmc', 'P1': 1000000, 'P2': 4000, 'P3': 20000, 'P4': 8, 'P5': 1, 'P6': 'threads'})


@pytest.fixture
def openmc_mold() -> CodeMold:
    return CodeMold(template_text=OPENMC_MOLD, launcher_template=OPENMC_LAUNCHER)


@pytest.fixture
def openmc_like() -> synthbench.SyntheticObjective:
    return synthbench.openmc_like_objective()


@pytest.fixture
def fom_metric() -> MetricSpec:
    return MetricSpec(kind=MetricKind.FOM, source=MetricSource.STDOUT_REGEX, pattern=r'FOM: ([0-9.eE+-]+)')


@pytest.fixture
def runtime_metric() -> MetricSpec:
    return MetricSpec(kind=MetricKind.RUNTIME, source=MetricSource.WALL_TIME)


def write_yaml(path: Path, document: dict) -> Path:
    schema_loader.dump(path, document)
    return path


@pytest.fixture
def synthetic_campaign(tmp_path: Path):
    """Factory writing a synthetic campaign file; keyword arguments land in its campaign section"""

    def make(name: str = 'openmc-like', synthetic: dict = None, baseline: dict = None, **campaign) -> Path:
        document = {
            'evaluator': f'synthetic:{name}',
            'synthetic': synthetic or {},
            'campaign': {'eval_timeout': 5.0, 'max_evals': 8, 'n_workers': 1, 'seed': 7, 'n_trees': 10, 'candidate_pool_size': 200, **campaign},
            'output_dir': 'out',
        }
        if baseline is not None:
            document['baseline'] = baseline
        return write_yaml(tmp_path / 'campaign.yaml', document)

    return make
