"""Level-N Rokhlin towers and the T^q tower over A*_N.

Tower level i is T^i(B*_N). A*_N keeps the base points whose next q - 1
returns also land in the base, so (T^q)^i(A*_N) for 0 <= i < h_N is again a
tower. Set claims are checked exactly on one period of B_M^Z; measure claims
compare certified interval endpoints.

Two sets play the role of the base. ``base_event`` is the plain cylinder of
B_N. ``stack_base_event`` drops the occurrences of B_N that straddle a higher
spacer (they exist when b == 2a), which leaves exactly the recursive copies,
i.e. the bottom of the N-th cutting-and-stacking column.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from djr.core.errors import ConstraintError
from djr.core.settings import DEFAULT_DEPTH
from djr.measure import (
    Atom,
    CertifiedMeasure,
    Event,
    PeriodicScan,
    all_of,
    any_of,
    certified_measure,
    shift_event,
    spacer_event,
    sym_diff_measure,
)
from djr.words import SPACER, SystemParams, height, materialize_block

logger = logging.getLogger(__name__)


def printed_coefficient(q: int) -> Fraction:
    """(q-1)(q-2)/2, the coefficient printed with the A*_N bound."""
    return Fraction((q - 1) * (q - 2), 2)


def safe_coefficient(q: int) -> Fraction:
    """q(q-1)/2, what the triangle inequality gives for the same sum."""
    return Fraction(q * (q - 1), 2)


def tower_factor(params: SystemParams, N: int, coefficient: Fraction) -> Fraction:
    return 1 - coefficient / params.b ** (N - 1)


@dataclass(frozen=True)
class TowerSpec:
    params: SystemParams
    q: int
    N: int
    M: int

    def __post_init__(self):
        if self.q < 1:
            raise ConstraintError(f"q must be positive, got {self.q}")
        if self.N < 1:
            raise ConstraintError(f"tower level must be >= 1, got N={self.N}")
        if self.M < self.N + 2:
            raise ConstraintError(f"scan level M={self.M} must be >= N + 2 = {self.N + 2}")
        h_N = height(self.params, self.N)
        if h_N % self.q != 1 % self.q:
            raise ConstraintError(
                f"N={self.N} is not in N_{self.q}: h_N = {h_N} = {h_N % self.q} mod {self.q}"
            )
        if height(self.params, self.M) < 2 * self.q * h_N:
            raise ConstraintError(
                f"B_{self.M} is too short for a T^{self.q} tower of height {h_N}"
            )
        if tower_factor(self.params, self.N, printed_coefficient(self.q)) <= 0:
            logger.warning(
                "Coverage bound for q=%d, N=%d is vacuous with coefficient %s",
                self.q,
                self.N,
                printed_coefficient(self.q),
            )

    @property
    def h_N(self) -> int:
        return height(self.params, self.N)

    def __str__(self):
        return f"{self.params} q={self.q} N={self.N} M={self.M}"


def tower_spec(
    params: SystemParams,
    q: int,
    N: int,
    M: int | None = None,
    *,
    depth: int = DEFAULT_DEPTH,
) -> TowerSpec:
    """TowerSpec with the scan level defaulting to N + depth."""
    return TowerSpec(params=params, q=q, N=N, M=N + depth if M is None else M)


def base_event(params: SystemParams, N: int, *, cap: int | None = None) -> Event:
    return Atom(0, materialize_block(params, N, cap=cap).as_word())


def stack_base_event(params: SystemParams, N: int, *, cap: int | None = None) -> Event:
    """B_N at 0, followed by B_N directly or after one spacer."""
    if N < 1:
        raise ConstraintError(f"the stack base is defined for N >= 1, got {N}")
    block = materialize_block(params, N, cap=cap)
    word = block.as_word()
    return Atom(0, word) & (Atom(block.height, word) | Atom(block.height, SPACER + word))


def a_star_event(spec: TowerSpec, *, cap: int | None = None) -> Event:
    word = materialize_block(spec.params, spec.N, cap=cap).as_word()
    return all_of(Atom(i * spec.h_N, word) for i in range(spec.q))


@dataclass(frozen=True)
class DisjointnessResult:
    ok: bool
    levels: int
    collision: tuple[int, int] | None = None

    def __bool__(self):
        return self.ok


def check_level_disjointness(
    spec: TowerSpec, *, cap: int | None = None
) -> DisjointnessResult:
    """The levels T^(-q i)(A*_N), 0 <= i < h_N, are pairwise disjoint on B_M^Z."""
    a_star = a_star_event(spec, cap=cap)
    levels = [shift_event(a_star, -spec.q * i) for i in range(spec.h_N)]
    scan = PeriodicScan.for_events(spec.params, spec.M, levels, cap=cap)

    owners = [np.full(context.starts, -1, dtype=np.int64) for context in scan.contexts]
    collision = None
    for i, level in enumerate(levels):
        for owner, bitmap in zip(owners, scan.bitmaps(level, origin=0)):
            clash = bitmap & (owner >= 0)
            if collision is None and clash.any():
                position = int(np.argmax(clash))
                collision = (int(owner[position]), i)
            owner[bitmap] = i

    result = DisjointnessResult(ok=collision is None, levels=len(levels), collision=collision)
    if collision is None:
        logger.info("%d levels of the T^%d tower are pairwise disjoint", len(levels), spec.q)
    else:
        logger.error("Tower levels %d and %d intersect for %s", *collision, spec)
    return result


@dataclass(frozen=True)
class TauResult:
    mapping: tuple[int, ...]
    is_permutation: bool
    containment_ok: bool

    def __getitem__(self, i: int) -> int:
        return self.mapping[i]

    def __len__(self):
        return len(self.mapping)


def tau_permutation(spec: TowerSpec, *, cap: int | None = None) -> TauResult:
    """i -> i q mod h_N, with the evidence that (T^q)^i(A*_N) sits in level tau(i).

    Containment is checked on the scanned positions of B_M^Z: wherever the
    shifted A*_N holds, the shifted base must hold too.
    """
    h_N = spec.h_N
    mapping = np.arange(h_N, dtype=np.int64) * spec.q % h_N
    is_permutation = np.unique(mapping).size == h_N

    base = base_event(spec.params, spec.N, cap=cap)
    a_star = a_star_event(spec, cap=cap)
    scan = PeriodicScan(spec.params, spec.M, a_star.span, cap=cap)
    # relative to the level's own origin the bitmaps only depend on this offset
    implied: dict[int, bool] = {}
    containment_ok = True
    for i in range(h_N):
        level = shift_event(a_star, spec.q * i)
        target = shift_event(base, int(mapping[i]))
        relative = target.min_offset - level.min_offset
        if relative not in implied:
            inside = scan.bitmaps(level, origin=level.min_offset)
            column = scan.bitmaps(target, origin=level.min_offset)
            implied[relative] = not any(
                (held & ~covered).any() for held, covered in zip(inside, column)
            )
        if not implied[relative]:
            logger.error("(T^%d)^%d(A*) is not inside T^%d(B*)", spec.q, i, mapping[i])
            containment_ok = False
            break
    return TauResult(
        mapping=tuple(int(value) for value in mapping),
        is_permutation=bool(is_permutation),
        containment_ok=containment_ok,
    )


@dataclass(frozen=True)
class BoundCheck:
    """A certified measure compared against an exact bound."""

    measure: CertifiedMeasure
    bound: Fraction
    ok: bool
    relation: str = "<"

    def __iter__(self):
        return iter((self.measure, self.bound, self.ok))

    def to_json(self) -> dict:
        return {
            "measure": self.measure.to_json(),
            "bound": [str(self.bound.numerator), str(self.bound.denominator)],
            "relation": self.relation,
            "ok": self.ok,
        }


def _below(measure: CertifiedMeasure, bound: Fraction) -> BoundCheck:
    return BoundCheck(measure, bound, measure.upper < bound, "<")


def _above(measure: CertifiedMeasure, bound: Fraction) -> BoundCheck:
    return BoundCheck(measure, bound, measure.lower > bound, ">")


def a_star_return_check(
    spec: TowerSpec,
    *,
    mu_base: CertifiedMeasure | None = None,
    cap: int | None = None,
) -> BoundCheck:
    """mu((T^q)^(h_N)(A*_N) Δ A*_N) < (q^2 - 2q + 2) / b^(N-1) * mu(B*_N)."""
    if mu_base is None:
        mu_base = certified_measure(
            spec.params, spec.M, stack_base_event(spec.params, spec.N, cap=cap), cap=cap
        )
    a_star = a_star_event(spec, cap=cap)
    lhs = sym_diff_measure(
        spec.params, spec.M, shift_event(a_star, spec.q * spec.h_N), a_star, cap=cap
    )
    q = spec.q
    bound = Fraction(q * q - 2 * q + 2, spec.params.b ** (spec.N - 1)) * mu_base.center
    return _below(lhs, bound)


def coverage_event(spec: TowerSpec, *, cap: int | None = None) -> Event:
    a_star = a_star_event(spec, cap=cap)
    return any_of(shift_event(a_star, spec.q * i) for i in range(spec.h_N))


def coverage_bound(spec: TowerSpec, coefficient: Fraction) -> Fraction:
    b = spec.params.b
    return tower_factor(spec.params, spec.N, coefficient) * (
        1 - Fraction(b, height(spec.params, spec.N + 1))
    )


def coverage_check(
    spec: TowerSpec,
    *,
    coefficient: Fraction | None = None,
    coverage: CertifiedMeasure | None = None,
    cap: int | None = None,
) -> BoundCheck:
    """mu of the T^q tower over A*_N exceeds (1 - c / b^(N-1)) (1 - b / h_(N+1))."""
    if coefficient is None:
        coefficient = printed_coefficient(spec.q)
    if coverage is None:
        coverage = certified_measure(spec.params, spec.M, coverage_event(spec, cap=cap), cap=cap)
    return _above(coverage, coverage_bound(spec, coefficient))


@dataclass(frozen=True)
class ColumnCoverResult:
    union: BoundCheck
    arithmetic_ok: bool
    complement_ok: bool

    @property
    def ok(self) -> bool:
        return self.union.ok and self.arithmetic_ok and self.complement_ok

    def __bool__(self):
        return self.ok


def tower_union_event(params: SystemParams, N: int, *, cap: int | None = None) -> Event:
    """The column over the stack base: union of T^i(B*_N), 0 <= i < h_N."""
    base = stack_base_event(params, N, cap=cap)
    return any_of(shift_event(base, i) for i in range(height(params, N)))


def column_cover_check(
    params: SystemParams, N: int, M: int, *, cap: int | None = None
) -> ColumnCoverResult:
    """The column covers more than 1 - b^2 h_N / h_(N+1) > 1 - 1 / b^(N-1)."""
    if N < 2:
        raise ConstraintError(f"the column bound needs N >= 2, got {N}")
    b = params.b
    ratio = Fraction(b * b * height(params, N), height(params, N + 1))
    union = certified_measure(params, M, tower_union_event(params, N, cap=cap), cap=cap)
    check = _above(union, 1 - ratio)
    arithmetic_ok = ratio < Fraction(1, b ** (N - 1))
    complement_ok = 1 - union.lower < Fraction(1, b ** (N - 1))
    return ColumnCoverResult(union=check, arithmetic_ok=arithmetic_ok, complement_ok=complement_ok)


def base_return_check(
    params: SystemParams,
    N: int,
    M: int,
    *,
    mu_base: CertifiedMeasure | None = None,
    cap: int | None = None,
) -> BoundCheck:
    """mu(T^(h_N)(B*_N) Δ B*_N) < mu(B*_N) / b^(N-1)."""
    base = stack_base_event(params, N, cap=cap)
    if mu_base is None:
        mu_base = certified_measure(params, M, base, cap=cap)
    lhs = sym_diff_measure(params, M, shift_event(base, height(params, N)), base, cap=cap)
    return _below(lhs, mu_base.center / params.b ** (N - 1))


def complement_identity(
    column: CertifiedMeasure, spacer: CertifiedMeasure
) -> bool:
    """mu(C_N) + mu(S_N) = 1 is consistent with both intervals."""
    return column.lower + spacer.lower <= 1 <= column.upper + spacer.upper


@dataclass(frozen=True)
class TowerReport:
    spec: TowerSpec
    mu_base: CertifiedMeasure
    mu_stack_base: CertifiedMeasure
    mu_A: CertifiedMeasure
    a_star_ok: bool
    a_star_printed_ok: bool
    disjoint_ok: bool
    a_star_return_lhs: CertifiedMeasure
    a_star_return_bound: Fraction
    a_star_return_ok: bool
    coverage: CertifiedMeasure
    coverage_bound: Fraction
    coverage_ok: bool
    coverage_safe_bound: Fraction
    coverage_safe_ok: bool
    tau_is_permutation: bool
    tau_containment_ok: bool
    base_return_ok: bool
    column_cover_ok: bool
    complement_ok: bool
    mu_spacer: CertifiedMeasure
    collision: tuple[int, int] | None = None
    vacuous: tuple[str, ...] = ()
    informational: tuple[str, ...] = field(default=("a_star_printed", "coverage_printed"))

    def verdicts(self) -> dict[str, bool]:
        """Every check by name; the informational ones are not gated."""
        return {
            "a_star": self.a_star_ok,
            "a_star_printed": self.a_star_printed_ok,
            "disjoint": self.disjoint_ok,
            "a_star_return": self.a_star_return_ok,
            "coverage": self.coverage_safe_ok,
            "coverage_printed": self.coverage_ok,
            "tau": self.tau_is_permutation,
            "tau_containment": self.tau_containment_ok,
            "base_return": self.base_return_ok,
            "column_cover": self.column_cover_ok,
            "complement": self.complement_ok,
        }

    def failed_checks(self) -> list[str]:
        return [
            name
            for name, ok in self.verdicts().items()
            if not ok and name not in self.informational
        ]

    @property
    def passed(self) -> bool:
        return not self.failed_checks()

    def to_json(self) -> dict:
        def rational(value: Fraction) -> list[str]:
            return [str(value.numerator), str(value.denominator)]

        return {
            "a": self.spec.params.a,
            "b": self.spec.params.b,
            "q": self.spec.q,
            "N": self.spec.N,
            "M": self.spec.M,
            "mu_base": self.mu_base.to_json(),
            "mu_stack_base": self.mu_stack_base.to_json(),
            "mu_A": self.mu_A.to_json(),
            "mu_spacer": self.mu_spacer.to_json(),
            "a_star_ok": self.a_star_ok,
            "a_star_printed_ok": self.a_star_printed_ok,
            "disjoint_ok": self.disjoint_ok,
            "collision": list(self.collision) if self.collision else None,
            "claim2": {
                "lhs": self.a_star_return_lhs.to_json(),
                "bound": rational(self.a_star_return_bound),
                "ok": self.a_star_return_ok,
            },
            "coverage": {
                "measure": self.coverage.to_json(),
                "bound": rational(self.coverage_bound),
                "printed_ok": self.coverage_ok,
                "safe_bound": rational(self.coverage_safe_bound),
                "ok": self.coverage_safe_ok,
            },
            "tau_ok": self.tau_is_permutation,
            "tau_containment_ok": self.tau_containment_ok,
            "ineq2_ok": self.base_return_ok,
            "ineq3_ok": self.column_cover_ok,
            "complement_ok": self.complement_ok,
            "vacuous": list(self.vacuous),
            "passed": self.passed,
        }

    def to_row(self) -> dict[str, object]:
        """Flat CSV row; measures rendered as exact centers."""
        return {
            "a": self.spec.params.a,
            "b": self.spec.params.b,
            "q": self.spec.q,
            "N": self.spec.N,
            "M": self.spec.M,
            "mu_base": str(self.mu_base.center),
            "mu_A": str(self.mu_A.center),
            "claim2_lhs": str(self.a_star_return_lhs.center),
            "claim2_bound": str(self.a_star_return_bound),
            "coverage": str(self.coverage.center),
            "coverage_bound": str(self.coverage_bound),
            "coverage_safe_bound": str(self.coverage_safe_bound),
            **{f"{name}_ok": int(ok) for name, ok in self.verdicts().items()},
        }


def vacuous_verdicts(spec: TowerSpec) -> tuple[str, ...]:
    """Verdicts whose bound factor 1 - c / b^(N-1) is not positive at this level."""
    names: list[str] = []
    coefficients = {"": safe_coefficient(spec.q), "_printed": printed_coefficient(spec.q)}
    for suffix, coefficient in coefficients.items():
        if tower_factor(spec.params, spec.N, coefficient) <= 0:
            names += [f"a_star{suffix}", f"coverage{suffix}"]
    if names:
        logger.warning("Vacuous tower bounds for %s: %s", spec, names)
    return tuple(names)


def rank_one_report(spec: TowerSpec, *, cap: int | None = None) -> TowerReport:
    """Run every tower check for ``spec``; failures are recorded, not raised."""
    logger.info("Building tower report for %s", spec)
    params, N, M = spec.params, spec.N, spec.M

    mu_base = certified_measure(params, M, base_event(params, N, cap=cap), cap=cap)
    mu_stack = certified_measure(params, M, stack_base_event(params, N, cap=cap), cap=cap)
    mu_A = certified_measure(params, M, a_star_event(spec, cap=cap), cap=cap)
    a_star_ok = mu_A.lower >= tower_factor(params, N, safe_coefficient(spec.q)) * mu_stack.upper
    a_star_printed_ok = (
        mu_A.lower >= tower_factor(params, N, printed_coefficient(spec.q)) * mu_stack.upper
    )

    disjoint = check_level_disjointness(spec, cap=cap)
    a_star_return = a_star_return_check(spec, mu_base=mu_stack, cap=cap)

    coverage = certified_measure(params, M, coverage_event(spec, cap=cap), cap=cap)
    printed = coverage_check(spec, coverage=coverage)
    safe = coverage_check(spec, coefficient=safe_coefficient(spec.q), coverage=coverage)

    tau = tau_permutation(spec, cap=cap)
    base_return = base_return_check(params, N, M, mu_base=mu_stack, cap=cap)
    column_cover = column_cover_check(params, N, M, cap=cap)
    mu_spacer = certified_measure(params, M, spacer_event(params, N, cap=cap), cap=cap)

    report = TowerReport(
        spec=spec,
        mu_base=mu_base,
        mu_stack_base=mu_stack,
        mu_A=mu_A,
        a_star_ok=a_star_ok,
        a_star_printed_ok=a_star_printed_ok,
        disjoint_ok=disjoint.ok,
        a_star_return_lhs=a_star_return.measure,
        a_star_return_bound=a_star_return.bound,
        a_star_return_ok=a_star_return.ok,
        coverage=coverage,
        coverage_bound=printed.bound,
        coverage_ok=printed.ok,
        coverage_safe_bound=safe.bound,
        coverage_safe_ok=safe.ok,
        tau_is_permutation=tau.is_permutation,
        tau_containment_ok=tau.containment_ok,
        base_return_ok=base_return.ok,
        column_cover_ok=column_cover.union.ok and column_cover.arithmetic_ok,
        complement_ok=column_cover.complement_ok
        and complement_identity(column_cover.union.measure, mu_spacer),
        mu_spacer=mu_spacer,
        collision=disjoint.collision,
        vacuous=vacuous_verdicts(spec),
    )
    if report.passed:
        logger.info("Tower report for %s: PASS", spec)
    else:
        logger.warning("Tower report for %s failed: %s", spec, report.failed_checks())
    return report
