"""JSON serialization utilities for exact-arithmetic results."""

from fractions import Fraction
from pathlib import Path
from typing import Any


def rational_pair(value: Fraction | int) -> list[str]:
    """Exact rational as a ``[numerator, denominator]`` string pair."""
    value = Fraction(value)
    return [str(value.numerator), str(value.denominator)]


def sanitize_for_json(obj: Any) -> Any:
    """
    Recursively convert verification results to JSON-serializable types.

    Fractions become string pairs so no precision is lost, objects exposing
    ``to_json`` serialize themselves, and paths become strings.

    Examples:
        >>> sanitize_for_json({"mu": Fraction(5, 13)})
        {'mu': ['5', '13']}

        >>> sanitize_for_json((1, Path("r.json")))
        [1, 'r.json']
    """
    if obj is None or isinstance(obj, (str, bool, int)):
        return obj

    if isinstance(obj, Fraction):
        return rational_pair(obj)

    if isinstance(obj, float):
        raise TypeError(f"refusing to serialize inexact value {obj!r}")

    if hasattr(obj, "to_json"):
        return sanitize_for_json(obj.to_json())

    if isinstance(obj, dict):
        return {str(k): sanitize_for_json(v) for k, v in obj.items()}

    if isinstance(obj, (list, tuple, set, frozenset)):
        items = [sanitize_for_json(item) for item in obj]
        return sorted(items) if isinstance(obj, (set, frozenset)) else items

    if isinstance(obj, Path):
        return obj.as_posix()

    return str(obj)
