from typing import Any

from app.server.static.enums import ExitCode


class TunerException(Exception):
    """Base error carrying a user-facing detail and the exit code the CLI should return

    Args:
        detail (str): Message shown to the user
        exit_code (ExitCode): Process exit code for this failure
    """

    exit_code: ExitCode = ExitCode.ABORTED

    def __init__(self, detail: str, exit_code: ExitCode = None) -> None:
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


class InvalidInputError(TunerException):
    exit_code = ExitCode.INVALID_INPUT


class EvaluatorSetupError(TunerException):
    exit_code = ExitCode.INVALID_INPUT


class SpaceExhaustedError(TunerException):
    pass


class StoreWriteError(TunerException):
    pass


class CampaignAbortedError(TunerException):
    """Raised when a campaign stops early on an unrecoverable error; holds what was already flushed"""

    def __init__(self, detail: str, records: list[Any] = None) -> None:
        super().__init__(detail, ExitCode.ABORTED)
        self.records = records or []
