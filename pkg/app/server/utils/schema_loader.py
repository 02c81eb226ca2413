import pathlib
from typing import Any, Union

import yaml

from app.server.handler.exceptions import InvalidInputError
from app.server.static import localization


def load(path: Union[str, pathlib.Path]) -> Any:
    """Synchronously read a YAML or JSON document (JSON is a YAML subset)

    Args:
        path (str): file path

    Raises:
        InvalidInputError: If the file is missing or does not parse

    Returns:
        Any: parsed document
    """
    filepath = pathlib.Path(path)
    if not filepath.is_file():
        raise InvalidInputError(f'{localization.EXCEPTION_FILE_NOT_FOUND}: {filepath}')
    contents = filepath.read_text(encoding='utf-8')
    try:
        return yaml.safe_load(contents)
    except yaml.YAMLError as error:
        raise InvalidInputError(f'{localization.EXCEPTION_FILE_UNREADABLE}: {filepath}: {error}') from error


def dump(path: Union[str, pathlib.Path], document: Any) -> None:
    """Write a document as YAML, keeping key order

    Args:
        path (str): file path
        document (Any): data to serialize
    """
    pathlib.Path(path).write_text(yaml.safe_dump(document, sort_keys=False), encoding='utf-8')
