"""The skew product T_(q,b)(x, y) = (b x, x y + 1) and the relative-prime relation.

Iterating from (1, 0) gives T^k(1, 0) = (b^k, h_(k-1)) mod q, so the heights
of the block hierarchy can be studied entirely through residues. All residues
are kept canonical in [0, q).
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass
from functools import lru_cache

from sympy import factorint
from sympy.ntheory import n_order

from djr.core.errors import ConstraintError, NoWitnessError, NotCoprimeError
from djr.words import SystemParams, height

logger = logging.getLogger(__name__)

DEFAULT_SEARCH = 10_000


@dataclass(frozen=True)
class SkewState:
    """A point (x, y) of Z_q* x Z_q for the map with multiplier ``b``."""

    q: int
    b: int
    x: int
    y: int

    def __post_init__(self):
        if self.q < 2:
            raise ConstraintError(f"modulus must be >= 2, got q={self.q}")
        if not (0 <= self.x < self.q and 0 <= self.y < self.q):
            raise ConstraintError(f"residues must lie in [0, {self.q}), got {self}")
        if math.gcd(self.x, self.q) != 1:
            raise ConstraintError(f"x={self.x} is not a unit mod {self.q}")

    @classmethod
    def origin(cls, q: int, b: int) -> SkewState:
        return cls(q=q, b=b, x=1 % q, y=0)

    def __str__(self):
        return f"({self.x},{self.y})"


@dataclass(frozen=True)
class SkewOrderResult:
    orbit_period: int
    permutation_order: int


def _require_coprime(b: int, q: int) -> None:
    if math.gcd(b, q) != 1:
        raise NotCoprimeError(b, q)


def skew_step(s: SkewState) -> SkewState:
    """One application of T_(q,b)."""
    _require_coprime(s.b, s.q)
    return SkewState(q=s.q, b=s.b, x=s.b * s.x % s.q, y=(s.x * s.y + 1) % s.q)


def skew_orbit(q: int, b: int, steps: int) -> list[SkewState]:
    """T(1,0), ..., T^steps(1,0)."""
    state = SkewState.origin(q, b)
    orbit = []
    for _ in range(steps):
        state = skew_step(state)
        orbit.append(state)
    return orbit


@lru_cache(maxsize=256)
def _height_residues(b: int, q: int, k_max: int) -> tuple[int, ...]:
    residues = [1 % q]
    power = 1 % q
    for _ in range(k_max):
        power = power * b % q
        residues.append((power * residues[-1] + 1) % q)
    return tuple(residues)


def h_mod_sequence(params: SystemParams, q: int, k_max: int) -> tuple[int, ...]:
    """h_0 mod q, ..., h_(k_max) mod q using only modular arithmetic."""
    if q < 1:
        raise ConstraintError(f"modulus must be positive, got q={q}")
    return _height_residues(params.b, q, k_max)


def h_mod(params: SystemParams, q: int, k: int) -> int:
    return h_mod_sequence(params, q, k)[k]


def verify_orbit_identity(params: SystemParams, q: int, k_max: int) -> bool:
    """T^k(1,0) == (b^k mod q, h_(k-1) mod q) for 1 <= k <= k_max."""
    _require_coprime(params.b, q)
    residues = h_mod_sequence(params, q, k_max)
    for k, state in enumerate(skew_orbit(q, params.b, k_max), start=1):
        if (state.x, state.y) != (pow(params.b, k, q), residues[k - 1]):
            logger.error("Orbit identity fails at k=%d for q=%d, b=%d", k, q, params.b)
            return False
    return True


def skew_order(q: int, b: int) -> SkewOrderResult:
    """Return period of (1,0) and the order of T as a permutation of Z_q* x Z_q."""
    _require_coprime(b, q)
    start = SkewState.origin(q, b)
    state = skew_step(start)
    orbit_period = 1
    while state != start:
        state = skew_step(state)
        orbit_period += 1

    units = [x for x in range(q) if math.gcd(x, q) == 1]
    seen: set[tuple[int, int]] = set()
    order = 1
    for x in units:
        for y in range(q):
            if (x, y) in seen:
                continue
            length = 0
            cx, cy = x, y
            while (cx, cy) not in seen:
                seen.add((cx, cy))
                cx, cy = b * cx % q, (cx * cy + 1) % q
                length += 1
            order = math.lcm(order, length)
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug(
            "q=%d, b=%d: orbit period %d, permutation order %d (ord_q(b)=%d)",
            q,
            b,
            orbit_period,
            order,
            n_order(b, q) if q > 1 else 1,
        )
    return SkewOrderResult(orbit_period=orbit_period, permutation_order=order)


def eventual_period(q: int, b: int) -> tuple[int, int]:
    """(preperiod, period) of (b^(k+1), h_k) mod q for any q >= 1.

    Defined through the same update (x, y) -> (b x, x y + 1) on Z_q x Z_q,
    which needs no invertibility.
    """
    first_seen: dict[tuple[int, int], int] = {}
    x, y = 1 % q, 0
    step = 0
    while (x, y) not in first_seen:
        first_seen[(x, y)] = step
        x, y = b * x % q, (x * y + 1) % q
        step += 1
    start = first_seen[(x, y)]
    return start, step - start


def nq_set(params: SystemParams, q: int, k_max: int) -> list[int]:
    """N_q restricted to [0, k_max]: levels with h_k = 1 mod q."""
    if q < 2:
        raise ConstraintError(f"N_q needs q >= 2, got q={q}")
    residues = h_mod_sequence(params, q, k_max)
    return [k for k, residue in enumerate(residues) if residue == 1]


def split_modulus(b: int, q: int) -> tuple[int, int]:
    """q = d * q' with every prime of d dividing b and gcd(b, q') = 1."""
    d = 1
    for prime, exponent in factorint(q).items():
        if b % prime == 0:
            d *= prime**exponent
    return d, q // d


def default_search_range(params: SystemParams, q: int) -> int:
    """10 * q * permutation order of the coprime part, or 10^4 if it is trivial."""
    _, coprime = split_modulus(params.b, q)
    if coprime < 2:
        return DEFAULT_SEARCH
    return 10 * q * skew_order(coprime, params.b).permutation_order


def verify_prime_relation(
    params: SystemParams, q: int, k_max: int | None = None
) -> list[int]:
    """All k <= k_max with h_(k+1) = 1 mod q; raises if there is none."""
    if q < 2:
        raise ConstraintError(f"the relation needs q >= 2, got q={q}")
    if k_max is None:
        k_max = default_search_range(params, q)
    residues = h_mod_sequence(params, q, k_max + 1)
    witnesses = [k for k in range(k_max + 1) if residues[k + 1] == 1]
    if not witnesses:
        raise NoWitnessError(q, params.b, k_max)
    return witnesses


def factored_witnesses(params: SystemParams, q: int, k_max: int) -> list[int]:
    """Witnesses predicted by q = d q': h_k = 0 mod q' and d | b^(k+1).

    They form a subset of :func:`verify_prime_relation`.
    """
    d, coprime = split_modulus(params.b, q)
    residues = h_mod_sequence(params, coprime, k_max)
    return [
        k
        for k in range(k_max + 1)
        if residues[k] % coprime == 0 and pow(params.b, k + 1, d) == 0 % d
    ]


def exact_residues(params: SystemParams, q: int, k_max: int) -> list[int]:
    """Reference path: reduce exact big-integer heights."""
    return [height(params, k) % q for k in range(k_max + 1)]


def sweep_rows(
    params: SystemParams, moduli: Iterable[int], k_max: int
) -> list[dict[str, int]]:
    """Rows q, b, k, h_k_mod_q, in_Nq for every modulus and level."""
    rows = []
    for q in moduli:
        for k, residue in enumerate(h_mod_sequence(params, q, k_max)):
            rows.append(
                {
                    "q": q,
                    "b": params.b,
                    "k": k,
                    "h_k_mod_q": residue,
                    "in_Nq": int(residue == 1 % q),
                }
            )
    return rows

