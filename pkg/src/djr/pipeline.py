# src/djr/pipeline.py
from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np

from djr import __version__
from djr.core.errors import DJRError
from djr.core.settings import Settings
from djr.measure import (
    Atom,
    certified_measure,
    density_in_level,
    rigidity_check,
    spacer_event,
)
from djr.modular import (
    exact_residues,
    factored_witnesses,
    h_mod_sequence,
    nq_set,
    skew_order,
    verify_orbit_identity,
    verify_prime_relation,
)
from djr.tower import (
    TowerSpec,
    printed_coefficient,
    rank_one_report,
    safe_coefficient,
    tower_factor,
)
from djr.utils.json_utils import rational_pair
from djr.words import (
    SystemParams,
    Word,
    check_neighbor_copies,
    height,
    materialize_block,
    occurrences,
    recursive_copy_positions,
    stabilization_check,
    symbol_at,
    symbol_by_copies,
)

log = logging.getLogger(__name__)

__all__ = ["CheckResult", "VerificationPipeline", "VerificationReport"]

SCHEMA = "djr-report/1"
SEED = 20240229
SAMPLES_PER_LEVEL = 1000
COPY_TABLE_LIMIT = 1 << 21


def _random_position(rng: np.random.Generator, bound: int) -> int:
    """Position in [0, bound); bounds past int64 are drawn from raw bytes."""
    if bound <= np.iinfo(np.int64).max:
        return int(rng.integers(bound))
    size = (bound.bit_length() + 7) // 8 + 8
    return int.from_bytes(rng.bytes(size), "big") % bound


@dataclass
class CheckResult:
    name: str
    ok: bool
    details: dict[str, Any] = field(default_factory=dict)
    error: str | None = None

    def to_json(self) -> dict[str, Any]:
        data: dict[str, Any] = {"ok": self.ok, "details": self.details}
        if self.error is not None:
            data["error"] = self.error
        return data


@dataclass
class VerificationReport:
    params: SystemParams
    checks: list[CheckResult]
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(check.ok for check in self.checks)

    def failed_checks(self) -> list[str]:
        return [check.name for check in self.checks if not check.ok]

    def to_json(self) -> dict[str, Any]:
        """Deterministic document; anything run-dependent lives under ``meta``."""
        return {
            "schema": SCHEMA,
            "params": {"a": self.params.a, "b": self.params.b},
            "checks": {
                check.name: check.to_json()
                for check in sorted(self.checks, key=lambda c: c.name)
            },
            "passed": self.passed,
            "failed": sorted(self.failed_checks()),
            "meta": self.meta,
        }


class VerificationPipeline:
    """
    Runs the full verification suite for one parameter family.

    Each check is independent: a check that raises is recorded as failed with
    the error message and the suite moves on.
    """

    def __init__(
        self,
        settings: Settings,
        params: SystemParams,
        *,
        q_max: int = 3,
        k_max: int = 4,
        modulus_max: int = 100,
        witness_range: int = 10_000,
    ):
        self.settings = settings
        self.params = params
        self.q_max = q_max
        self.k_max = k_max
        self.modulus_max = modulus_max
        self.witness_range = witness_range

    def checks(self) -> list[tuple[str, Callable[[], CheckResult]]]:
        return [
            ("heights", self.check_heights),
            ("lazy_agreement", self.check_lazy_agreement),
            ("copy_structure", self.check_copy_structure),
            ("neighbor_copies", self.check_neighbor_copies),
            ("stabilization", self.check_stabilization),
            ("density_telescoping", self.check_density_telescoping),
            ("spacer_measure", self.check_spacer_measure),
            ("skew_identity", self.check_skew_identity),
            ("relative_prime", self.check_relative_prime),
            ("rigidity", self.check_rigidity),
            ("towers", self.check_towers),
        ]

    def run(self) -> VerificationReport:
        log.info("Starting verification suite for %s...", self.params)
        results = []
        for name, check in self.checks():
            log.info("Running check '%s'", name)
            try:
                result = check()
            except DJRError as e:
                log.error("Check '%s' could not complete: %s", name, e)
                result = CheckResult(name=name, ok=False, error=str(e))
            log.info("Check '%s': %s", name, "PASS" if result.ok else "FAIL")
            results.append(result)

        report = VerificationReport(
            params=self.params,
            checks=results,
            meta={
                "version": __version__,
                "cap": self.settings.cap,
                "depth": self.settings.depth,
                "tower_budget": self.settings.tower_budget,
                "q_max": self.q_max,
                "k_max": self.k_max,
                "modulus_max": self.modulus_max,
            },
        )
        if report.passed:
            log.info("Verification suite completed: all %d checks passed.", len(results))
        else:
            log.warning("Verification suite failed: %s", report.failed_checks())
        return report

    def _levels_within(self, limit: int, k_max: int) -> list[int]:
        return [k for k in range(k_max + 1) if height(self.params, k) <= limit]

    def check_heights(self) -> CheckResult:
        b = self.params.b
        bad = []
        for k in range(26):
            if height(self.params, k + 1) != b ** (k + 1) * height(self.params, k) + 1:
                bad.append(k)
            exponent = k * (k + 1) // 2
            if k >= 1 and not b**exponent < height(self.params, k) < b ** (exponent + 1):
                bad.append(k)
        return CheckResult("heights", not bad, {"levels": 26, "violations": bad})

    def check_lazy_agreement(self) -> CheckResult:
        mismatches = []
        full = self._levels_within(100_000, 5)
        for k in full:
            symbols = materialize_block(self.params, k, cap=self.settings.cap).require_symbols()
            lazy = np.fromiter(
                (symbol_at(self.params, k, pos) for pos in range(len(symbols))),
                dtype=np.uint8,
                count=len(symbols),
            )
            if not np.array_equal(lazy, symbols):
                mismatches.append({"k": k, "position": int(np.argmax(lazy != symbols))})

        # levels past the cap are resolved through the copy tables down to B_floor
        rng = np.random.default_rng(SEED)
        floor = materialize_block(self.params, full[-1], cap=self.settings.cap)
        sampled = {}
        for k in range(1, 13):
            h = height(self.params, k)
            positions = [_random_position(rng, h) for _ in range(SAMPLES_PER_LEVEL)]
            if h <= self.settings.cap:
                symbols = materialize_block(self.params, k, cap=self.settings.cap).require_symbols()
                expected = [int(symbols[pos]) for pos in positions]
                sampled[str(k)] = "materialized"
            elif self.params.b**k <= COPY_TABLE_LIMIT:
                expected = [
                    symbol_by_copies(self.params, k, pos, floor=floor) for pos in positions
                ]
                sampled[str(k)] = "copies"
            else:
                log.warning("Copy tables of B_%d are too large; sampling stops at k=%d", k, k - 1)
                break
            for pos, symbol in zip(positions, expected):
                if symbol_at(self.params, k, pos) != symbol:
                    mismatches.append({"k": k, "position": pos})
                    break
        return CheckResult(
            "lazy_agreement",
            not mismatches,
            {
                "full_levels": full,
                "sampled_levels": sampled,
                "samples_per_level": SAMPLES_PER_LEVEL,
                "mismatches": mismatches,
            },
        )

    def check_copy_structure(self) -> CheckResult:
        rows = []
        ok = True
        for k in range(self.k_max + 1):
            if height(self.params, k + 1) > self.settings.cap:
                break
            needle = materialize_block(self.params, k, cap=self.settings.cap).as_word()
            found = occurrences(
                materialize_block(self.params, k + 1, cap=self.settings.cap), needle
            )
            recursive = recursive_copy_positions(self.params, k)
            straddling = 1 if self.params.symmetric and k >= 1 else 0
            expected = self.params.b ** (k + 1) + straddling
            row_ok = len(found) == expected and set(recursive) <= set(found)
            ok = ok and row_ok
            rows.append({"k": k, "occurrences": len(found), "expected": expected, "ok": row_ok})
        return CheckResult("copy_structure", ok, {"levels": rows})

    def check_neighbor_copies(self) -> CheckResult:
        rows = []
        ok = True
        for k in (2, 3):
            M = k + 3
            while M > k + 2 and height(self.params, M) > self.settings.cap:
                M -= 1
            result = check_neighbor_copies(self.params, k, M, cap=self.settings.cap)
            ok = ok and result.ok
            rows.append(
                {
                    "k": k,
                    "M": M,
                    "occurrences": result.occurrences,
                    "counterexample": result.counterexample,
                }
            )
        return CheckResult("neighbor_copies", ok, {"levels": rows})

    def check_stabilization(self) -> CheckResult:
        lengths = list(range(1, 11))
        unstable = [
            n for n in lengths if not stabilization_check(self.params, n, cap=self.settings.cap)
        ]
        return CheckResult("stabilization", not unstable, {"lengths": lengths, "unstable": unstable})

    def _sample_words(self, count: int, max_length: int) -> list[Word]:
        level = 0
        while height(self.params, level) < max_length:
            level += 1
        symbols = materialize_block(self.params, level + 2, cap=self.settings.cap).require_symbols()
        rng = np.random.default_rng(SEED)
        words = []
        for _ in range(count):
            length = int(rng.integers(1, max_length + 1))
            start = int(rng.integers(0, len(symbols) - length + 1))
            words.append(Word.from_array(symbols[start : start + length]))
        return words

    def check_density_telescoping(self) -> CheckResult:
        violations = []
        words = self._sample_words(200, 10)
        for w in words:
            e = Atom(0, w)
            levels = [k for k in range(6) if height(self.params, k) >= len(w)]
            densities = {
                k: density_in_level(self.params, k, e, cap=self.settings.cap) for k in levels
            }
            for k in levels[:-1]:
                step = abs(densities[k + 1] - densities[k])
                if not step < Fraction(2 * len(w), height(self.params, k + 1)):
                    violations.append({"word": str(w), "k": k, "step": rational_pair(step)})
        return CheckResult(
            "density_telescoping", not violations, {"words": len(words), "violations": violations}
        )

    def check_spacer_measure(self) -> CheckResult:
        rows = []
        ok = True
        for k in (1, 2, 3):
            measure = certified_measure(
                self.params, k + 4, spacer_event(self.params, k, cap=self.settings.cap),
                cap=self.settings.cap,
            )
            h_next = height(self.params, k + 1)
            row_ok = Fraction(1, h_next) < measure.lower and measure.upper < Fraction(
                self.params.b, h_next
            )
            ok = ok and row_ok
            rows.append({"k": k, "measure": measure.to_json(), "ok": row_ok})
        return CheckResult("spacer_measure", ok, {"levels": rows})

    def check_skew_identity(self) -> CheckResult:
        failures = []
        orders = {}
        k_max = 500
        for q in range(2, 51):
            if math.gcd(q, self.params.b) != 1:
                continue
            identity = verify_orbit_identity(self.params, q, k_max)
            oracle = list(h_mod_sequence(self.params, q, k_max)) == exact_residues(
                self.params, q, k_max
            )
            order = skew_order(q, self.params.b)
            divides = order.permutation_order % order.orbit_period == 0
            returns = all(
                h_mod_sequence(self.params, q, s * order.orbit_period)[-2] == 0
                for s in (1, 2, 3)
            )
            if not (identity and oracle and divides and returns):
                failures.append(q)
            orders[str(q)] = [order.orbit_period, order.permutation_order]
        return CheckResult(
            "skew_identity", not failures, {"k_max": k_max, "orders": orders, "failures": failures}
        )

    def check_relative_prime(self) -> CheckResult:
        short = []
        inconsistent = []
        counts = {}
        for q in range(2, self.modulus_max + 1):
            witnesses = verify_prime_relation(self.params, q, self.witness_range)
            counts[str(q)] = len(witnesses)
            if len(witnesses) < 3:
                short.append(q)
            if not set(factored_witnesses(self.params, q, self.witness_range)) <= set(witnesses):
                inconsistent.append(q)
        return CheckResult(
            "relative_prime",
            not short and not inconsistent,
            {
                "k_max": self.witness_range,
                "witness_counts": counts,
                "too_few": short,
                "factored_mismatch": inconsistent,
            },
        )

    def check_rigidity(self) -> CheckResult:
        results = []
        for k in (2, 3, 4, 5):
            if height(self.params, k + 1) > self.settings.cap:
                break
            results.append(rigidity_check(self.params, k, cap=self.settings.cap))
        return CheckResult(
            "rigidity",
            bool(results) and all(r.passed for r in results),
            {"levels": [r.to_json() for r in results]},
        )

    def tower_specs(self) -> tuple[list[TowerSpec], list[dict[str, Any]]]:
        """One tower per q <= q_max, at the smallest admissible N >= 2 in N_q.

        Levels where the q(q-1)/2 bound is positive are preferred. Otherwise the
        smallest level with a positive printed bound is used and the report
        marks the q(q-1)/2 verdicts as vacuous.
        """
        specs, skipped = [], []
        limit = 2
        while height(self.params, limit + 1) <= self.settings.tower_budget:
            limit += 1
        for q in range(2, self.q_max + 1):
            levels = [
                N
                for N in nq_set(self.params, q, limit)
                if N >= 2 and height(self.params, N) <= self.settings.tower_budget
            ]
            if not levels:
                skipped.append({"q": q, "reason": "no level of N_q within the height budget"})
                continue
            safe = [N for N in levels if tower_factor(self.params, N, safe_coefficient(q)) > 0]
            printed = [
                N for N in levels if tower_factor(self.params, N, printed_coefficient(q)) > 0
            ]
            if not (safe or printed):
                skipped.append(
                    {
                        "q": q,
                        "reason": f"coverage bound vacuous at every admissible level {levels}",
                    }
                )
                continue
            N = (safe or printed)[0]
            specs.append(TowerSpec(self.params, q, N, self.settings.scan_level(N)))
        return specs, skipped

    def check_towers(self) -> CheckResult:
        specs, skipped = self.tower_specs()
        reports = [rank_one_report(spec, cap=self.settings.cap) for spec in specs]
        return CheckResult(
            "towers",
            all(report.passed for report in reports),
            {
                "reports": [report.to_json() for report in reports],
                "skipped": skipped,
            },
        )
