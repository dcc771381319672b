from unittest.mock import MagicMock

import pytest

from djr.core.errors import CapExceededError
from djr.core.settings import Settings
from djr.pipeline import SCHEMA, CheckResult, VerificationPipeline
from djr.words import make_params, symbol_at


@pytest.fixture
def settings() -> Settings:
    return Settings(environ={})


@pytest.fixture
def pipeline(settings: Settings) -> VerificationPipeline:
    return VerificationPipeline(settings, make_params(1, 2), q_max=5, k_max=2)


def test_pipeline_records_passing_and_failing_checks(pipeline, monkeypatch):
    """
    A check that raises a djr error is recorded as failed and the suite goes on.
    """
    passing = MagicMock(return_value=CheckResult("heights", True, {"levels": 26}))
    raising = MagicMock(side_effect=CapExceededError(9, 10**20, 1000))
    trailing = MagicMock(return_value=CheckResult("rigidity", True))
    monkeypatch.setattr(
        pipeline,
        "checks",
        lambda: [("heights", passing), ("towers", raising), ("rigidity", trailing)],
    )

    report = pipeline.run()

    passing.assert_called_once()
    raising.assert_called_once()
    trailing.assert_called_once()
    assert not report.passed
    assert report.failed_checks() == ["towers"]

    document = report.to_json()
    assert document["schema"] == SCHEMA
    assert list(document["checks"]) == ["heights", "rigidity", "towers"]
    assert "exceeds the materialization cap" in document["checks"]["towers"]["error"]
    assert document["failed"] == ["towers"]
    assert document["meta"]["q_max"] == 5
    assert document["meta"]["cap"] == pipeline.settings.cap


def test_pipeline_all_passing(pipeline, monkeypatch):
    monkeypatch.setattr(
        pipeline,
        "checks",
        lambda: [("heights", MagicMock(return_value=CheckResult("heights", True)))],
    )
    report = pipeline.run()
    assert report.passed
    assert report.to_json()["failed"] == []


def test_tower_specs_for_binary_family(pipeline):
    specs, skipped = pipeline.tower_specs()
    assert [(s.q, s.N, s.M) for s in specs] == [(2, 2, 5), (3, 4, 7), (4, 4, 7), (5, 4, 7)]
    assert skipped == []


def test_tower_specs_for_two_three_family(settings):
    pipeline = VerificationPipeline(settings, make_params(2, 3), q_max=4)
    specs, skipped = pipeline.tower_specs()
    assert [(s.q, s.N) for s in specs] == [(2, 2), (3, 3)]
    assert skipped == [{"q": 4, "reason": "coverage bound vacuous at every admissible level [2]"}]


def test_tower_budget_limits_levels():
    settings = Settings(overrides={"tower_budget": 100}, environ={})
    pipeline = VerificationPipeline(settings, make_params(1, 2), q_max=5)
    specs, skipped = pipeline.tower_specs()
    assert [(s.q, s.N) for s in specs] == [(2, 2), (3, 2)]
    assert skipped == [
        {"q": 4, "reason": "coverage bound vacuous at every admissible level [2]"},
        {"q": 5, "reason": "no level of N_q within the height budget"},
    ]


def test_lazy_agreement_uses_independent_sources(pipeline):
    result = pipeline.check_lazy_agreement()
    assert result.ok, result.details["mismatches"]
    sources = result.details["sampled_levels"]
    assert [sources[str(k)] for k in range(1, 7)] == ["materialized"] * 6
    assert [sources[str(k)] for k in range(7, 13)] == ["copies"] * 6
    assert result.details["samples_per_level"] * len(sources) >= 10_000


def test_lazy_agreement_detects_a_wrong_reader(pipeline, monkeypatch):
    monkeypatch.setattr(
        "djr.pipeline.symbol_at", lambda params, k, pos: 1 - symbol_at(params, k, pos)
    )
    result = pipeline.check_lazy_agreement()
    assert not result.ok
    assert {entry["k"] for entry in result.details["mismatches"]} >= set(range(1, 13))


@pytest.mark.parametrize(
    "check",
    [
        "check_heights",
        "check_copy_structure",
        "check_stabilization",
        "check_spacer_measure",
        "check_skew_identity",
    ],
)
def test_individual_checks_pass(pipeline, check):
    result = getattr(pipeline, check)()
    assert result.ok, result.details


def test_relative_prime_check_on_small_range(settings):
    pipeline = VerificationPipeline(
        settings, make_params(2, 3), modulus_max=12, witness_range=2000
    )
    result = pipeline.check_relative_prime()
    assert result.ok
    assert set(result.details["witness_counts"]) == {str(q) for q in range(2, 13)}


@pytest.mark.slow
def test_full_suite_for_binary_family(pipeline):
    pipeline.q_max = 2
    report = pipeline.run()
    assert report.passed, report.failed_checks()
    assert len(report.checks) == 11
