"""Decimal rendering of exact rationals for the text output."""

from decimal import Decimal, localcontext
from fractions import Fraction

from djr.measure import CertifiedMeasure


def format_fraction(value: Fraction, digits: int = 12) -> str:
    """``value`` rounded to ``digits`` significant digits, in scientific form when tiny."""
    with localcontext() as ctx:
        ctx.prec = digits
        decimal = Decimal(value.numerator) / Decimal(value.denominator)
    if decimal != 0 and abs(decimal) < Decimal("1e-4"):
        return f"{decimal:.{digits - 1}e}"
    return f"{decimal:f}"


def format_measure(measure: CertifiedMeasure, digits: int = 12) -> str:
    """``center ± radius`` exactly, followed by the decimal rendering."""
    return (
        f"{measure.center} ± {measure.radius} "
        f"(≈ {format_fraction(measure.center, digits)} ± "
        f"{format_fraction(measure.radius, 3)})"
    )
