import functools
from typing import Any, Callable

import typer
from pydantic import ValidationError

from app.server.handler.exceptions import TunerException
from app.server.logger.custom_logger import logger
from app.server.static import localization
from app.server.static.enums import ExitCode


def validation_error_message(exc: ValidationError) -> str:
    """Formats the first pydantic error the way the CLI reports it

    Args:
        exc (ValidationError): Exception object

    Returns:
        str: "<model> validation error at (<loc>): <msg>"
    """
    if errors := exc.errors():
        # Use only the first error message
        first_error = errors[0]
        location = '.'.join(str(part) for part in first_error['loc']) or exc.title
        return f"{exc.title} validation error at ({location}): {first_error['msg']}"
    return f'{exc.title} validation error unknown'


def handle_exception(exc: Exception) -> ExitCode:
    """Logs an exception and returns the exit code it maps to

    Args:
        exc (Exception): Exception raised by a command

    Returns:
        ExitCode: 2 for invalid input, 3 for aborts and unexpected errors, or the code carried by a TunerException
    """
    hex_code = hex(hash(exc))
    if isinstance(exc, ValidationError):
        error_message = f'{validation_error_message(exc)}: {hex_code}'
        exit_code = ExitCode.INVALID_INPUT
    elif isinstance(exc, TunerException):
        error_message = f'{exc.detail}: {hex_code}'
        exit_code = exc.exit_code
    elif isinstance(exc, ValueError):
        error_message = f'{str(exc)}: {hex_code}'
        exit_code = ExitCode.INVALID_INPUT
    else:
        error_message = f'{localization.EXCEPTION_GENERIC_ERROR}: {hex_code}'
        exit_code = ExitCode.ABORTED
    logger.opt(exception=exc).error(f'{error_message} >> {str(exc)}')
    typer.echo(error_message, err=True)
    return exit_code


def exit_on_error(command: Callable[..., Any]) -> Callable[..., Any]:
    """Decorator for CLI commands: turns raised exceptions into logged errors and a process exit code"""

    @functools.wraps(command)
    def inner(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (typer.Exit, typer.Abort):
            raise
        except Exception as error:  # pylint: disable=broad-except
            raise typer.Exit(code=int(handle_exception(error))) from error

    return inner
