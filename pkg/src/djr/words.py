"""Block hierarchy of the generalized del Junco-Rudolph shift.

The language is generated by

    B_0 = 0
    B_{k+1} = (B_k)^(a*b^k) 1 (B_k)^((b-a)*b^k)

with heights h_0 = 1, h_{k+1} = b^(k+1) h_k + 1. The last factor is a power
of B_k; printings that show B_0 there do not match the height recurrence.

Symbols are stored one byte per symbol (values 0 and 1) in read-only numpy
arrays. Heights are Python ints kept in a per-multiplier table, so they never
overflow. Materialized blocks are memoized with ``functools.lru_cache``;
handles are immutable and may be shared between threads.
"""

from __future__ import annotations

import logging
from bisect import bisect_right
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from djr.core.errors import (
    CapExceededError,
    ConstraintError,
    NotMaterializedError,
    OccurrenceError,
    PositionError,
    SpanError,
)
from djr.core.settings import resolve_cap

logger = logging.getLogger(__name__)

__all__ = [
    "BlockHandle",
    "NeighborCheck",
    "SystemParams",
    "Word",
    "check_neighbor_copies",
    "export_block",
    "factor_set",
    "find_all",
    "height",
    "is_valid_word",
    "lazy_block",
    "load_word",
    "make_params",
    "match_bitmap",
    "materialize_block",
    "occurrence_gaps",
    "occurrences",
    "ones_count",
    "recursive_copy_positions",
    "spurious_copy_positions",
    "stabilization_check",
    "symbol_at",
    "symbol_by_copies",
]

# Patterns up to this length are matched with vectorised comparisons; longer
# ones go through bytes.find, which is linear in the haystack.
_SHORT_PATTERN = 32


@dataclass(frozen=True)
class SystemParams:
    """The pair (a, b) selecting one map of the family."""

    a: int
    b: int

    def __post_init__(self):
        if self.b < 2:
            raise ConstraintError(f"b must be >= 2, got b={self.b}")
        if not 1 <= self.a <= self.b - 1:
            raise ConstraintError(
                f"a must satisfy 1 <= a <= b-1, got a={self.a}, b={self.b}"
            )

    @property
    def symmetric(self) -> bool:
        """True when b = 2a; then B_k also occurs straddling every higher spacer."""
        return self.b == 2 * self.a

    def __str__(self):
        return f"(a={self.a}, b={self.b})"


def make_params(a: int, b: int) -> SystemParams:
    """Validate and build :class:`SystemParams`."""
    return SystemParams(a=a, b=b)


@dataclass(frozen=True)
class Word:
    """A finite nonempty word over {0, 1}; ``symbols`` holds raw 0/1 bytes."""

    symbols: bytes

    def __post_init__(self):
        if len(self.symbols) == 0:
            raise ConstraintError("a word must contain at least one symbol")
        if self.symbols.strip(b"\x00\x01"):
            raise ConstraintError("word symbols must be 0 or 1")

    @classmethod
    def from_str(cls, text: str) -> Word:
        """Parse an ASCII word such as ``"0101"``."""
        if text.strip("01"):
            raise ConstraintError(f"word {text!r} contains symbols other than 0/1")
        return cls(bytes(int(ch) for ch in text))

    @classmethod
    def from_array(cls, array: np.ndarray) -> Word:
        return cls(np.asarray(array, dtype=np.uint8).tobytes())

    def as_array(self) -> np.ndarray:
        return np.frombuffer(self.symbols, dtype=np.uint8)

    def __len__(self):
        return len(self.symbols)

    def __add__(self, other: Word) -> Word:
        return Word(self.symbols + other.symbols)

    def __str__(self):
        return bytes(48 + s for s in self.symbols).decode("ascii")


SPACER = Word(b"\x01")


@dataclass(frozen=True)
class BlockHandle:
    """Level ``k`` of the hierarchy, either materialized or lazy."""

    params: SystemParams
    k: int
    height: int
    symbols: np.ndarray | None = field(default=None, compare=False, repr=False)

    @property
    def is_materialized(self) -> bool:
        return self.symbols is not None

    def require_symbols(self) -> np.ndarray:
        if self.symbols is None:
            raise NotMaterializedError(
                f"B_{self.k} for {self.params} is lazy; materialize it first"
            )
        return self.symbols

    def as_word(self) -> Word:
        return Word(self.require_symbols().tobytes())

    def __str__(self):
        return str(self.as_word())


_HEIGHTS: dict[int, list[int]] = {}


def _height(b: int, k: int) -> int:
    heights = _HEIGHTS.setdefault(b, [1])
    while len(heights) <= k:
        j = len(heights) - 1
        heights.append(b ** (j + 1) * heights[j] + 1)
    return heights[k]


def height(params: SystemParams, k: int) -> int:
    """Exact h_k; memoized per multiplier b."""
    if k < 0:
        raise ConstraintError(f"level must be non-negative, got k={k}")
    return _height(params.b, k)


def ones_count(params: SystemParams, k: int) -> int:
    """Number of spacers in B_k: ones_0 = 0, ones_{j+1} = b^(j+1) ones_j + 1."""
    ones = 0
    for j in range(k):
        ones = params.b ** (j + 1) * ones + 1
    return ones


@lru_cache(maxsize=8)
def _materialize(a: int, b: int, k: int) -> np.ndarray:
    block = np.zeros(1, dtype=np.uint8)
    spacer = np.ones(1, dtype=np.uint8)
    for j in range(k):
        copies = b**j
        block = np.concatenate(
            (np.tile(block, a * copies), spacer, np.tile(block, (b - a) * copies))
        )
    block.setflags(write=False)
    return block


def materialize_block(
    params: SystemParams, k: int, *, cap: int | None = None
) -> BlockHandle:
    """Return B_k with its symbol array; refuses blocks longer than ``cap``."""
    cap = resolve_cap(cap)
    h = height(params, k)
    if h > cap:
        raise CapExceededError(k, h, cap)
    if h > 1_000_000:
        logger.info("Materializing B_%d for %s (%d symbols)", k, params, h)
    symbols = _materialize(params.a, params.b, k)
    return BlockHandle(params=params, k=k, height=h, symbols=symbols)


def lazy_block(params: SystemParams, k: int) -> BlockHandle:
    """A handle that only knows h_k; symbols are read with :func:`symbol_at`."""
    return BlockHandle(params=params, k=k, height=height(params, k))


def symbol_at(params: SystemParams, k: int, pos: int) -> int:
    """Symbol of B_k at ``pos`` by descending the recursion, without materializing."""
    h = height(params, k)
    if not 0 <= pos < h:
        raise PositionError(f"position {pos} outside [0, {h}) for B_{k}")
    while k > 0:
        below = height(params, k - 1)
        left = params.a * params.b ** (k - 1) * below
        if pos < left:
            pos %= below
        elif pos == left:
            return 1
        else:
            pos = (pos - left - 1) % below
        k -= 1
    return 0


@lru_cache(maxsize=16)
def _copy_starts(a: int, b: int, k: int) -> tuple[int, ...]:
    return tuple(recursive_copy_positions(SystemParams(a, b), k))


def symbol_by_copies(
    params: SystemParams, k: int, pos: int, *, floor: BlockHandle
) -> int:
    """Symbol of B_k at ``pos`` located through the copy positions of each level.

    The position is bisected into the recursive copy of B_(j-1) inside B_j
    that contains it, level by level, until it lands in the materialized block
    ``floor``. Landing between copies means the spacer. The copy table of level
    j - 1 has b^j entries.
    """
    h = height(params, k)
    if not 0 <= pos < h:
        raise PositionError(f"position {pos} outside [0, {h}) for B_{k}")
    if floor.params != params or floor.k > k:
        raise ConstraintError(f"B_{floor.k} of {floor.params} cannot resolve B_{k} of {params}")
    symbols = floor.require_symbols()
    while k > floor.k:
        starts = _copy_starts(params.a, params.b, k - 1)
        start = starts[bisect_right(starts, pos) - 1]
        if pos - start >= height(params, k - 1):
            return 1
        pos -= start
        k -= 1
    return int(symbols[pos])


def match_bitmap(text: np.ndarray, pattern: bytes) -> np.ndarray:
    """Boolean array ``m`` with ``m[i]`` true iff ``pattern`` starts at ``i``."""
    m = len(pattern)
    n = len(text) - m + 1
    if n <= 0:
        return np.zeros(0, dtype=bool)
    if m <= _SHORT_PATTERN:
        mask = np.ones(n, dtype=bool)
        for j, symbol in enumerate(pattern):
            mask &= text[j : j + n] == symbol
        return mask
    mask = np.zeros(n, dtype=bool)
    mask[find_all(text, pattern)] = True
    return mask


def find_all(text: np.ndarray, pattern: bytes, limit: int | None = None) -> list[int]:
    """All start positions of ``pattern`` in ``text`` (overlaps included)."""
    if len(pattern) <= _SHORT_PATTERN:
        found = np.flatnonzero(match_bitmap(text, pattern))
        if limit is not None:
            found = found[found < limit]
        return [int(p) for p in found]

    haystack = text.tobytes()
    stop = len(haystack) if limit is None else min(len(haystack), limit + len(pattern) - 1)
    positions = []
    start = haystack.find(pattern, 0, stop)
    while start != -1:
        positions.append(start)
        start = haystack.find(pattern, start + 1, stop)
    return positions


def _periodic_text(symbols: np.ndarray, needle_length: int) -> np.ndarray:
    # append the first |w|-1 symbols so reads past the end wrap around
    return np.concatenate((symbols, symbols[: needle_length - 1]))


def occurrences(
    haystack: BlockHandle, needle: Word, periodic: bool = False
) -> list[int]:
    """Sorted start positions of ``needle`` in B_k, or in B_k^Z when ``periodic``."""
    symbols = haystack.require_symbols()
    if len(needle) > haystack.height:
        raise SpanError(
            f"needle of length {len(needle)} is longer than h_{haystack.k} "
            f"= {haystack.height}"
        )
    if not periodic:
        return find_all(symbols, needle.symbols)
    text = _periodic_text(symbols, len(needle))
    return find_all(text, needle.symbols, limit=haystack.height)


def occurrence_gaps(haystack: BlockHandle, needle: Word) -> tuple[int, int]:
    """(min, max) distance between cyclically consecutive occurrences in B_M^Z.

    A single occurrence per period gives the gap h_M.
    """
    positions = occurrences(haystack, needle, periodic=True)
    if not positions:
        raise OccurrenceError(f"{needle} does not occur in B_{haystack.k}^Z")
    starts = np.asarray(positions, dtype=np.int64)
    gaps = np.diff(np.append(starts, starts[0] + haystack.height))
    return int(gaps.min()), int(gaps.max())


def recursive_copy_positions(params: SystemParams, k: int) -> list[int]:
    """Start positions of the b^(k+1) copies of B_k that build B_{k+1}."""
    h = height(params, k)
    left = params.a * params.b**k
    right = (params.b - params.a) * params.b**k
    first = [i * h for i in range(left)]
    second = [left * h + 1 + i * h for i in range(right)]
    return first + second


def spurious_copy_positions(
    params: SystemParams, k: int, *, cap: int | None = None
) -> list[int]:
    """Occurrences of B_k in B_{k+1} that are not recursive copies.

    Non-empty exactly when b = 2a and k >= 1: the copy straddling the level-(k+1)
    spacer.
    """
    needle = materialize_block(params, k, cap=cap).as_word()
    found = occurrences(materialize_block(params, k + 1, cap=cap), needle)
    return sorted(set(found) - set(recursive_copy_positions(params, k)))


def _cutoff_level(params: SystemParams, length: int) -> int:
    k = 0
    while height(params, k) < length:
        k += 1
    return k


def is_valid_word(params: SystemParams, w: Word, *, cap: int | None = None) -> bool:
    """True iff ``w`` belongs to the language.

    Every factor of length <= h_K lies inside B_(K+1) B_(K+1) or
    B_(K+1) 1 B_(K+1), and both occur in B_(K+2); :func:`stabilization_check`
    confirms the cutoff numerically.
    """
    level = _cutoff_level(params, len(w)) + 2
    block = materialize_block(params, level, cap=cap)
    return bool(find_all(block.require_symbols(), w.symbols, limit=None))


def _factor_codes(symbols: np.ndarray, length: int) -> set:
    if length <= 62:
        count = len(symbols) - length + 1
        if count <= 0:
            return set()
        codes = np.zeros(count, dtype=np.uint32 if length <= 32 else np.int64)
        for j in range(length):
            codes = (codes << 1) | symbols[j : j + count]
        if length <= 20:
            present = np.bincount(codes, minlength=1 << length)
            return {int(code) for code in np.flatnonzero(present)}
        return {int(code) for code in np.unique(codes)}
    raw = symbols.tobytes()
    return {raw[i : i + length] for i in range(len(raw) - length + 1)}


def _decode(code, length: int) -> Word:
    if isinstance(code, bytes):
        return Word(code)
    return Word(bytes((code >> (length - 1 - i)) & 1 for i in range(length)))


def factor_set(handle: BlockHandle, length: int) -> frozenset[Word]:
    """All distinct words of the given length occurring in B_k."""
    if length < 1:
        raise ConstraintError(f"factor length must be positive, got {length}")
    codes = _factor_codes(handle.require_symbols(), length)
    return frozenset(_decode(code, length) for code in codes)


def stabilization_check(
    params: SystemParams, length: int, *, cap: int | None = None
) -> bool:
    """True iff B_(K+2) and B_(K+3) have the same factors of ``length``."""
    level = _cutoff_level(params, length) + 2
    lower = materialize_block(params, level, cap=cap)
    upper = materialize_block(params, level + 1, cap=cap)
    same = factor_set(lower, length) == factor_set(upper, length)
    logger.debug(
        "Factor sets of length %d stabilise between B_%d and B_%d: %s",
        length,
        level,
        level + 1,
        same,
    )
    return same


@dataclass(frozen=True)
class NeighborCheck:
    """Outcome of :func:`check_neighbor_copies`; truthy when the property holds."""

    ok: bool
    occurrences: int
    counterexample: int | None = None

    def __bool__(self):
        return self.ok


def check_neighbor_copies(
    params: SystemParams, k: int, M: int, *, cap: int | None = None
) -> NeighborCheck:
    """Every B_k 1 B_k in B_M^Z is preceded and followed by a copy of B_k."""
    if k < 2:
        raise ConstraintError(f"the neighbour property is stated for k >= 2, got {k}")
    if M < k + 2:
        raise ConstraintError(f"scan level must satisfy M >= k + 2, got M={M}")
    block = materialize_block(params, k, cap=cap)
    scan = materialize_block(params, M, cap=cap)
    h = block.height
    pattern = block.as_word()
    needle = pattern + SPACER + pattern
    symbols = scan.require_symbols()
    offsets = np.arange(h, dtype=np.int64)
    reference = block.require_symbols()

    found = occurrences(scan, needle, periodic=True)
    for m in found:
        left = np.take(symbols, (m - h + offsets) % scan.height)
        right = np.take(symbols, (m + 2 * h + 1 + offsets) % scan.height)
        if not (np.array_equal(left, reference) and np.array_equal(right, reference)):
            logger.warning("Neighbour property fails at position %d of B_%d^Z", m, M)
            return NeighborCheck(ok=False, occurrences=len(found), counterexample=m)
    return NeighborCheck(ok=True, occurrences=len(found))


def export_block(handle: BlockHandle, path: Path) -> Path:
    """Write B_k as one line of ASCII '0'/'1' characters without separators."""
    symbols = handle.require_symbols()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes((symbols + ord("0")).astype(np.uint8).tobytes())
    logger.info("Wrote B_%d (%d symbols) to %s", handle.k, handle.height, path)
    return path


def load_word(text: str) -> Word:
    """Parse a word from ASCII text, ignoring surrounding whitespace."""
    return Word.from_str(text.strip())
