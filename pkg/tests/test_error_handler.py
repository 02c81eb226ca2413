import pytest
import typer
from pydantic import ValidationError

from app.server.handler.error_handler import exit_on_error, handle_exception
from app.server.handler.exceptions import CampaignAbortedError, EvaluatorSetupError, InvalidInputError, StoreWriteError
from app.server.models.space import ParameterSpace
from app.server.static.enums import ExitCode


def _validation_error() -> ValidationError:
    try:
        ParameterSpace.model_validate({'parameters': []})
    except ValidationError as error:
        return error
    raise AssertionError('empty space validated')


@pytest.mark.parametrize(
    'error, code',
    [
        (InvalidInputError('missing file'), ExitCode.INVALID_INPUT),
        (EvaluatorSetupError('unknown placeholder'), ExitCode.INVALID_INPUT),
        (ValueError('bad baseline'), ExitCode.INVALID_INPUT),
        (CampaignAbortedError('evaluator crashed', []), ExitCode.ABORTED),
        (StoreWriteError('disk full'), ExitCode.ABORTED),
        (RuntimeError('unexpected'), ExitCode.ABORTED),
    ],
)
def test_exceptions_map_to_exit_codes(error, code):
    assert handle_exception(error) == code


def test_validation_errors_are_invalid_input(capsys):
    assert handle_exception(_validation_error()) == ExitCode.INVALID_INPUT
    assert 'ParameterSpace validation error at' in capsys.readouterr().err


def test_decorated_command_exits_with_the_mapped_code():
    @exit_on_error
    def command() -> None:
        raise CampaignAbortedError('evaluator crashed', [])

    with pytest.raises(typer.Exit) as caught:
        command()
    assert caught.value.exit_code == 3
