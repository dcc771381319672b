"""Exception hierarchy shared by every djr module.

Each error also derives from the closest builtin so callers that only know
about ``ValueError`` or ``IndexError`` keep working.
"""

from __future__ import annotations


class DJRError(Exception):
    """Base class for all djr errors."""


class ConstraintError(DJRError, ValueError):
    """A parameter violates a documented constraint."""


class NotCoprimeError(ConstraintError):
    """The skew product needs gcd(b, q) == 1."""

    def __init__(self, b: int, q: int):
        self.b = b
        self.q = q
        super().__init__(f"gcd(b={b}, q={q}) != 1; the skew product is undefined")


class CapExceededError(DJRError, RuntimeError):
    """A block is longer than the materialisation cap."""

    def __init__(self, k: int, height: int, cap: int):
        self.k = k
        self.height = height
        self.cap = cap
        super().__init__(
            f"h_{k} = {height} exceeds the materialization cap of {cap} symbols"
        )


class PositionError(DJRError, IndexError):
    """A position lies outside [0, h_k)."""


class SpanError(DJRError, ValueError):
    """An event's span does not fit in the scanned period."""


class NotMaterializedError(DJRError, RuntimeError):
    """A lazy block handle was used where symbols are required."""


class OccurrenceError(DJRError, ValueError):
    """A needle does not occur where at least one occurrence is required."""


class NoWitnessError(DJRError, RuntimeError):
    """No k in the searched range satisfies h_{k+1} = 1 mod q."""

    def __init__(self, q: int, b: int, k_max: int):
        self.q = q
        self.b = b
        self.k_max = k_max
        super().__init__(
            f"no k in [0, {k_max}] with h_(k+1) = 1 mod {q} for b={b}; "
            "search a larger range"
        )


class ConfigError(DJRError, ValueError):
    """Configuration file or environment value is invalid."""
