"""Cylinder events, exact densities and certified measures.

Shift convention: (Tx)_n = x_(n+1). ``T^m`` therefore moves an atom at offset
``o`` to offset ``o - m``.

Densities are computed on the periodic approximation B_M^Z. For an event of
span ``s`` pick the smallest level L <= M with h_L >= s. B_M^Z is a cyclic
concatenation of copies of B_L, consecutive copies being separated by either
nothing or one spacer. A window of length ``s`` starting inside a copy (or on
the spacer after it) only sees that copy, the possible spacer and the next
copy, so counting over the two contexts B_L B_L and B_L 1 B_L weighted by
their exact multiplicities in B_M gives the exact count over B_M^Z. Nothing
longer than 2 h_L + 1 symbols is ever materialized, whatever M is.

The limit measure is certified with the telescoping bound
|d_(j+1)(e) - d_j(e)| < 2 s / h_(j+1), summed geometrically from M onwards.
No floating point is used outside rendering.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Iterator
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, reduce

import numpy as np

from djr.core.errors import ConstraintError, PositionError, SpanError
from djr.core.settings import resolve_cap
from djr.words import (
    SPACER,
    SystemParams,
    Word,
    height,
    match_bitmap,
    materialize_block,
)

logger = logging.getLogger(__name__)


class Event:
    """Boolean combination of atoms ``(offset, word)``."""

    def __and__(self, other: Event) -> Event:
        return And((self, other))

    def __or__(self, other: Event) -> Event:
        return Or((self, other))

    def __invert__(self) -> Event:
        return Not(self)

    def atoms(self) -> Iterator[Atom]:
        raise NotImplementedError

    def shifted(self, m: int) -> Event:
        raise NotImplementedError

    @cached_property
    def min_offset(self) -> int:
        return min(atom.offset for atom in self.atoms())

    @cached_property
    def max_end(self) -> int:
        return max(atom.offset + len(atom.word) for atom in self.atoms())

    @property
    def span(self) -> int:
        return self.max_end - self.min_offset


@dataclass(frozen=True, eq=True)
class Atom(Event):
    """``word`` occurs starting at relative ``offset``."""

    offset: int
    word: Word

    def atoms(self) -> Iterator[Atom]:
        yield self

    def shifted(self, m: int) -> Event:
        return Atom(self.offset - m, self.word)

    def __str__(self):
        return f"[{self.offset}:{self.word}]"


@dataclass(frozen=True, eq=True)
class And(Event):
    children: tuple[Event, ...]

    def __post_init__(self):
        if not self.children:
            raise ConstraintError("a conjunction needs at least one operand")

    def atoms(self) -> Iterator[Atom]:
        for child in self.children:
            yield from child.atoms()

    def shifted(self, m: int) -> Event:
        return And(tuple(child.shifted(m) for child in self.children))


@dataclass(frozen=True, eq=True)
class Or(Event):
    children: tuple[Event, ...]

    def __post_init__(self):
        if not self.children:
            raise ConstraintError("a disjunction needs at least one operand")

    def atoms(self) -> Iterator[Atom]:
        for child in self.children:
            yield from child.atoms()

    def shifted(self, m: int) -> Event:
        return Or(tuple(child.shifted(m) for child in self.children))


@dataclass(frozen=True, eq=True)
class Not(Event):
    child: Event

    def atoms(self) -> Iterator[Atom]:
        yield from self.child.atoms()

    def shifted(self, m: int) -> Event:
        return Not(self.child.shifted(m))


def atom(offset: int, word: Word | str) -> Atom:
    """Convenience constructor accepting ASCII words."""
    if isinstance(word, str):
        word = Word.from_str(word)
    return Atom(offset, word)


def all_of(events: Iterable[Event]) -> Event:
    events = tuple(events)
    return events[0] if len(events) == 1 else And(events)


def any_of(events: Iterable[Event]) -> Event:
    events = tuple(events)
    return events[0] if len(events) == 1 else Or(events)


def shift_event(e: Event, m: int) -> Event:
    """T^m(e) under the left-shift convention: offsets move by ``-m``."""
    return e.shifted(m)


def symmetric_difference(e1: Event, e2: Event) -> Event:
    return (e1 & ~e2) | (e2 & ~e1)


@dataclass(frozen=True)
class CertifiedMeasure:
    """Exact density at level ``level`` plus a rigorous tail radius."""

    center: Fraction
    radius: Fraction
    level: int

    @property
    def lower(self) -> Fraction:
        return max(Fraction(0), self.center - self.radius)

    @property
    def upper(self) -> Fraction:
        return min(Fraction(1), self.center + self.radius)

    def contains(self, value: Fraction) -> bool:
        return self.lower <= value <= self.upper

    def intersects(self, other: CertifiedMeasure) -> bool:
        return self.lower <= other.upper and other.lower <= self.upper

    def to_json(self) -> dict:
        return {
            "num": str(self.center.numerator),
            "den": str(self.center.denominator),
            "radius_num": str(self.radius.numerator),
            "radius_den": str(self.radius.denominator),
            "level": self.level,
        }

    @classmethod
    def from_json(cls, data: dict) -> CertifiedMeasure:
        return cls(
            center=Fraction(int(data["num"]), int(data["den"])),
            radius=Fraction(int(data["radius_num"]), int(data["radius_den"])),
            level=int(data["level"]),
        )

    def __str__(self):
        return f"{self.center} ± {self.radius}"


@dataclass(frozen=True)
class ScanContext:
    """``text`` is B_L B_L (gap 0) or B_L 1 B_L (gap 1); ``weight`` its count in B_M."""

    gap: int
    weight: int
    text: np.ndarray
    starts: int


class PeriodicScan:
    """Exact position counting on B_M^Z through level-L contexts."""

    def __init__(
        self,
        params: SystemParams,
        M: int,
        span: int,
        *,
        cap: int | None = None,
        base_level: int | None = None,
    ):
        self.params = params
        self.M = M
        self.height = height(params, M)
        if span > self.height:
            raise SpanError(f"span {span} exceeds the period h_{M} = {self.height}")
        if base_level is None:
            base_level = next(j for j in range(M + 1) if height(params, j) >= span)
        elif not 0 <= base_level <= M or height(params, base_level) < span:
            raise SpanError(f"level {base_level} cannot hold a window of span {span}")
        self.base_level = base_level
        block = materialize_block(params, base_level, cap=cap)
        h_base = block.height

        copies = params.b ** sum(range(base_level + 1, M + 1))
        with_spacer = self.height - copies * h_base
        plain = copies - with_spacer

        symbols = block.require_symbols()
        spacer = SPACER.as_array()
        self.contexts: list[ScanContext] = []
        if plain:
            self.contexts.append(
                ScanContext(0, plain, np.concatenate((symbols, symbols)), h_base)
            )
        if with_spacer:
            self.contexts.append(
                ScanContext(
                    1,
                    with_spacer,
                    np.concatenate((symbols, spacer, symbols)),
                    h_base + 1,
                )
            )
        self._bitmaps: list[dict[bytes, np.ndarray]] = [{} for _ in self.contexts]
        logger.debug(
            "Scan of B_%d^Z through B_%d: %d plain and %d spaced junctions",
            M,
            base_level,
            plain,
            with_spacer,
        )

    @classmethod
    def for_events(
        cls,
        params: SystemParams,
        M: int,
        events: Iterable[Event],
        *,
        cap: int | None = None,
    ) -> PeriodicScan:
        events = list(events)
        origin = min(e.min_offset for e in events)
        span = max(e.max_end for e in events) - origin
        return cls(params, M, span, cap=cap)

    @property
    def window(self) -> int:
        return height(self.params, self.base_level)

    def bitmaps(self, event: Event, origin: int | None = None) -> list[np.ndarray]:
        """Per context, the positions (relative to ``origin``) where ``event`` holds."""
        if origin is None:
            origin = event.min_offset
        if event.min_offset < origin or event.max_end - origin > self.window:
            raise SpanError(
                f"event window [{event.min_offset}, {event.max_end}) does not fit "
                f"level {self.base_level} from origin {origin}"
            )
        return [
            self._evaluate(event, index, origin)
            for index in range(len(self.contexts))
        ]

    def _evaluate(self, event: Event, index: int, origin: int) -> np.ndarray:
        context = self.contexts[index]
        if isinstance(event, Atom):
            cache = self._bitmaps[index]
            key = event.word.symbols
            if key not in cache:
                cache[key] = match_bitmap(context.text, key)
            start = event.offset - origin
            return cache[key][start : start + context.starts]
        if isinstance(event, Not):
            return ~self._evaluate(event.child, index, origin)
        parts = (self._evaluate(child, index, origin) for child in event.children)
        if isinstance(event, And):
            return reduce(np.logical_and, parts)
        if isinstance(event, Or):
            return reduce(np.logical_or, parts)
        raise TypeError(f"unsupported event node {type(event).__name__}")

    def count(self, event: Event) -> int:
        """Number of positions of one period of B_M^Z where ``event`` holds."""
        return sum(
            context.weight * int(np.count_nonzero(bitmap))
            for context, bitmap in zip(self.contexts, self.bitmaps(event))
        )

    def density(self, event: Event) -> Fraction:
        return Fraction(self.count(event), self.height)


def density_in_level(
    params: SystemParams,
    M: int,
    e: Event,
    *,
    cap: int | None = None,
    base_level: int | None = None,
) -> Fraction:
    """d_M(e): the exact fraction of positions of B_M^Z where ``e`` holds."""
    return PeriodicScan(params, M, e.span, cap=cap, base_level=base_level).density(e)


def tail_radius(params: SystemParams, M: int, span: int) -> Fraction:
    """Closed-form bound on sum_{j >= M} 2 span / h_(j+1)."""
    if span == 0:
        return Fraction(0)
    ratio = params.b ** (M + 2)
    return Fraction(2 * span, height(params, M + 1)) * Fraction(ratio, ratio - 1)


def default_scan_level(params: SystemParams, e: Event, depth: int = 3) -> int:
    """N + depth, N being the first level whose block is as long as the event."""
    level = 0
    while height(params, level) < e.span:
        level += 1
    return level + depth


def certified_measure(
    params: SystemParams,
    M: int | None,
    e: Event,
    *,
    cap: int | None = None,
) -> CertifiedMeasure:
    """Interval guaranteed to contain mu(e)."""
    if M is None:
        M = default_scan_level(params, e)
    center = density_in_level(params, M, e, cap=cap)
    return CertifiedMeasure(center, tail_radius(params, M, e.span), M)


def spacer_event(params: SystemParams, k: int, *, cap: int | None = None) -> Event:
    """S_k: the window [-h_k, h_k] reads B_k 1 B_k."""
    if k < 1:
        raise ConstraintError(f"S_k is defined for k >= 1, got {k}")
    block = materialize_block(params, k, cap=cap)
    word = block.as_word()
    return Atom(-block.height, word + SPACER + word)


def sym_diff_measure(
    params: SystemParams,
    M: int | None,
    e1: Event,
    e2: Event,
    *,
    cap: int | None = None,
) -> CertifiedMeasure:
    return certified_measure(params, M, symmetric_difference(e1, e2), cap=cap)


def rigidity_pair_measure(
    params: SystemParams, k: int, n: int, M: int | None = None, *, cap: int | None = None
) -> CertifiedMeasure:
    """Certified mu(T^(h_n)(C) Δ C) for the cylinder C of B_k, n >= k."""
    if n < k:
        raise ConstraintError(f"need n >= k, got n={n}, k={k}")
    cylinder = Atom(0, materialize_block(params, k, cap=cap).as_word())
    shifted = shift_event(cylinder, height(params, n))
    return sym_diff_measure(params, M, cylinder, shifted, cap=cap)


def _mismatches(params: SystemParams, k: int, t: int, cap: int | None) -> np.ndarray:
    block = materialize_block(params, k, cap=cap)
    if not 0 <= t <= block.height:
        raise PositionError(f"shift t={t} outside [0, h_{k}] = [0, {block.height}]")
    symbols = block.require_symbols()
    return symbols != np.roll(symbols, -t)


def coding_distance_level(
    params: SystemParams, k: int, t: int, *, cap: int | None = None
) -> Fraction:
    """delta_k(T^t): mismatch density between B_k^Z and its t-shift."""
    mismatches = _mismatches(params, k, t, cap)
    return Fraction(int(np.count_nonzero(mismatches)), len(mismatches))


def coding_distance_window(
    params: SystemParams, k: int, t: int, N: int, *, cap: int | None = None
) -> Fraction:
    """Finite-window coding distance on (B_k)^N, penalising the last t positions."""
    if N < 1:
        raise ConstraintError(f"window multiplicity must be positive, got N={N}")
    mismatches = _mismatches(params, k, t, cap)
    h = len(mismatches)
    total = N * int(np.count_nonzero(mismatches))
    if t:
        total += t - int(np.count_nonzero(mismatches[h - t :]))
    return Fraction(total, N * h)


@dataclass(frozen=True)
class CodingDistanceResult:
    t: int
    levels: dict[int, Fraction]
    limit: CertifiedMeasure
    steps_ok: bool

    def to_json(self) -> dict:
        return {
            "t": str(self.t),
            "levels": {
                str(k): [str(v.numerator), str(v.denominator)]
                for k, v in sorted(self.levels.items())
            },
            "limit": self.limit.to_json(),
            "steps_ok": self.steps_ok,
        }


def coding_distance_certified(
    params: SystemParams,
    t: int,
    k_lo: int,
    k_hi: int,
    *,
    cap: int | None = None,
) -> CodingDistanceResult:
    """Per-level delta_k(T^t) for k in [k_lo, k_hi] and a certified limit."""
    if k_hi < k_lo:
        raise ConstraintError(f"empty level range [{k_lo}, {k_hi}]")
    if t >= height(params, k_lo) and t != 0:
        raise ConstraintError(f"shift t={t} must be below h_{k_lo}")
    levels = {k: coding_distance_level(params, k, t, cap=cap) for k in range(k_lo, k_hi + 1)}

    steps_ok = True
    for k in range(k_lo, k_hi):
        step = abs(levels[k + 1] - levels[k])
        bound = Fraction(2 * t, height(params, k + 1))
        if step > bound:
            logger.error(
                "delta_%d and delta_%d differ by %s > %s for t=%d",
                k,
                k + 1,
                step,
                bound,
                t,
            )
            steps_ok = False
    limit = CertifiedMeasure(levels[k_hi], tail_radius(params, k_hi, t), k_hi)
    return CodingDistanceResult(t=t, levels=levels, limit=limit, steps_ok=steps_ok)


@dataclass(frozen=True)
class RigidityResult:
    k: int
    threshold: Fraction
    distance: CodingDistanceResult

    @property
    def passed(self) -> bool:
        return self.distance.steps_ok and self.distance.limit.upper < self.threshold

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "threshold": [str(self.threshold.numerator), str(self.threshold.denominator)],
            "distance": self.distance.to_json(),
            "passed": self.passed,
        }


def rigidity_check(
    params: SystemParams, k: int, *, extra_levels: int = 3, cap: int | None = None
) -> RigidityResult:
    """Certify delta(T^(h_k)) < 2^-k using the levels k+1 .. k+extra_levels.

    Levels whose blocks exceed the cap are dropped from the top of the range.
    """
    limit = resolve_cap(cap)
    k_lo = k + 1
    k_hi = k + extra_levels
    while k_hi > k_lo and height(params, k_hi) > limit:
        k_hi -= 1
    distance = coding_distance_certified(params, height(params, k), k_lo, k_hi, cap=cap)
    result = RigidityResult(k=k, threshold=Fraction(1, 2**k), distance=distance)
    logger.info(
        "delta(T^h%d) in [%s, %s] using levels %d..%d: %s",
        k,
        float(distance.limit.lower),
        float(distance.limit.upper),
        k_lo,
        k_hi,
        "PASS" if result.passed else "FAIL",
    )
    return result
