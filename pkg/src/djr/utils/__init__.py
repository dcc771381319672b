"""Utility functions for djr-verifier."""

from .json_utils import rational_pair, sanitize_for_json
from .rationals import format_fraction, format_measure

__all__ = ["format_fraction", "format_measure", "rational_pair", "sanitize_for_json"]
