from typing import Any


def filter_none(data: dict[str, Any]) -> dict[str, Any]:
    """Drops unset entries, such as CLI flags the user did not pass"""
    return {key: value for key, value in data.items() if value is not None}
