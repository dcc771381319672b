from pathlib import Path
from unittest.mock import MagicMock

import numpy as np
import pytest

from djr.core.errors import (
    CapExceededError,
    ConstraintError,
    NotMaterializedError,
    OccurrenceError,
    PositionError,
    SpanError,
)
from djr.words import (
    SPACER,
    Word,
    check_neighbor_copies,
    export_block,
    factor_set,
    height,
    is_valid_word,
    lazy_block,
    load_word,
    make_params,
    match_bitmap,
    materialize_block,
    occurrence_gaps,
    occurrences,
    ones_count,
    recursive_copy_positions,
    spurious_copy_positions,
    stabilization_check,
    symbol_at,
    symbol_by_copies,
)

FAMILIES = [(1, 2), (1, 3), (2, 3)]


@pytest.fixture
def chacon_like():
    return make_params(1, 2)


@pytest.fixture
def two_three():
    return make_params(2, 3)


@pytest.mark.parametrize(
    "a, b, expected",
    [
        (1, 2, [1, 3, 13, 105, 1681]),
        (2, 3, [1, 4, 37, 1000, 81001]),
        (1, 3, [1, 4, 37, 1000, 81001]),
    ],
)
def test_height_values(a, b, expected):
    params = make_params(a, b)
    assert [height(params, k) for k in range(5)] == expected


@pytest.mark.parametrize("a, b", FAMILIES)
def test_height_recurrence_and_bounds(a, b):
    params = make_params(a, b)
    for k in range(26):
        assert height(params, k + 1) == b ** (k + 1) * height(params, k) + 1
    for k in range(1, 26):
        exponent = k * (k + 1) // 2
        assert b**exponent < height(params, k) < b ** (exponent + 1)


def test_height_rejects_negative_level(chacon_like):
    with pytest.raises(ConstraintError):
        height(chacon_like, -1)


@pytest.mark.parametrize("a, b", [(0, 2), (2, 2), (3, 2), (1, 1)])
def test_invalid_params_raise(a, b):
    with pytest.raises(ConstraintError):
        make_params(a, b)


def test_params_symmetry_flag():
    assert make_params(1, 2).symmetric
    assert not make_params(2, 3).symmetric
    assert str(make_params(2, 3)) == "(a=2, b=3)"


def test_word_parsing_and_concatenation():
    w = Word.from_str("010")
    assert len(w) == 3
    assert str(w + SPACER + w) == "0101010"
    assert load_word("  0110\n") == Word.from_str("0110")
    with pytest.raises(ConstraintError):
        Word.from_str("012")
    with pytest.raises(ConstraintError):
        Word(b"")


def test_small_blocks(chacon_like, two_three):
    assert str(materialize_block(chacon_like, 0)) == "0"
    assert str(materialize_block(chacon_like, 1)) == "010"
    assert str(materialize_block(chacon_like, 2)) == "0100101010010"
    assert str(materialize_block(two_three, 1)) == "0010"
    assert len(materialize_block(two_three, 2).require_symbols()) == 37


@pytest.mark.parametrize("a, b", FAMILIES)
def test_block_starts_and_ends_with_previous_block(a, b):
    params = make_params(a, b)
    for k in range(1, 5):
        block = materialize_block(params, k).require_symbols()
        below = materialize_block(params, k - 1).require_symbols()
        assert np.array_equal(block[: len(below)], below)
        assert np.array_equal(block[-len(below) :], below)


@pytest.mark.parametrize("a, b", FAMILIES)
def test_ones_count_matches_materialized(a, b):
    params = make_params(a, b)
    for k in range(6):
        if height(params, k) > 1_000_000:
            break
        symbols = materialize_block(params, k).require_symbols()
        assert int(symbols.sum()) == ones_count(params, k)


def test_materialized_blocks_are_read_only(chacon_like):
    symbols = materialize_block(chacon_like, 3).require_symbols()
    with pytest.raises(ValueError):
        symbols[0] = 1


def test_cap_exceeded(chacon_like):
    with pytest.raises(CapExceededError) as info:
        materialize_block(chacon_like, 5, cap=1000)
    assert "53793" in str(info.value)
    with pytest.raises(CapExceededError):
        materialize_block(chacon_like, 40)


def test_lazy_handle_has_no_symbols(chacon_like):
    handle = lazy_block(chacon_like, 30)
    assert not handle.is_materialized
    assert handle.height == height(chacon_like, 30)
    with pytest.raises(NotMaterializedError):
        handle.require_symbols()


def test_symbol_at_spacer_position(chacon_like):
    assert symbol_at(chacon_like, 2, 6) == 1
    assert symbol_at(chacon_like, 2, 5) == 0
    with pytest.raises(PositionError):
        symbol_at(chacon_like, 2, 13)
    with pytest.raises(PositionError):
        symbol_at(chacon_like, 2, -1)


@pytest.mark.parametrize("a, b", FAMILIES)
def test_symbol_at_agrees_with_materialized(a, b):
    params = make_params(a, b)
    for k in range(5 if b == 2 else 4):
        symbols = materialize_block(params, k).require_symbols()
        lazy = [symbol_at(params, k, pos) for pos in range(len(symbols))]
        assert lazy == symbols.tolist()


@pytest.mark.parametrize("a, b", FAMILIES)
def test_copy_tables_resolve_materialized_levels(a, b):
    params = make_params(a, b)
    floor = materialize_block(params, 1)
    for k in (1, 2, 3):
        symbols = materialize_block(params, k).require_symbols()
        located = [symbol_by_copies(params, k, pos, floor=floor) for pos in range(len(symbols))]
        assert located == symbols.tolist()


def test_symbol_at_deep_levels_match_copy_tables(chacon_like):
    floor = materialize_block(chacon_like, 5)
    rng = np.random.default_rng(7)
    for k in range(6, 13):
        h = height(chacon_like, k)
        for _ in range(200):
            pos = int.from_bytes(rng.bytes(16), "big") % h
            expected = symbol_by_copies(chacon_like, k, pos, floor=floor)
            assert symbol_at(chacon_like, k, pos) == expected


def test_symbol_by_copies_spacer_and_validation(chacon_like, two_three):
    floor = materialize_block(chacon_like, 2)
    assert symbol_by_copies(chacon_like, 3, 52, floor=floor) == 1
    assert symbol_by_copies(chacon_like, 3, 53, floor=floor) == 0
    with pytest.raises(PositionError):
        symbol_by_copies(chacon_like, 3, 105, floor=floor)
    with pytest.raises(ConstraintError):
        symbol_by_copies(chacon_like, 1, 0, floor=floor)
    with pytest.raises(ConstraintError):
        symbol_by_copies(two_three, 3, 0, floor=floor)


def test_match_bitmap_short_and_long_patterns():
    text = np.frombuffer(bytes([0, 1, 0, 0, 1, 0]), dtype=np.uint8)
    assert match_bitmap(text, bytes([0, 1, 0])).tolist() == [True, False, False, True]
    long_text = np.tile(np.array([0, 1], dtype=np.uint8), 40)
    pattern = bytes([0, 1] * 20)
    bitmap = match_bitmap(long_text, pattern)
    assert np.flatnonzero(bitmap).tolist() == list(range(0, 41, 2))


def test_occurrences_of_b1_in_b2(chacon_like):
    needle = materialize_block(chacon_like, 1).as_word()
    found = occurrences(materialize_block(chacon_like, 2), needle)
    assert found == [0, 3, 5, 7, 10]
    assert recursive_copy_positions(chacon_like, 1) == [0, 3, 7, 10]
    assert spurious_copy_positions(chacon_like, 1) == [5]


@pytest.mark.parametrize("a, b", FAMILIES)
def test_copy_structure(a, b):
    params = make_params(a, b)
    for k in range(5):
        if height(params, k + 1) > 2_000_000:
            break
        needle = materialize_block(params, k).as_word()
        found = occurrences(materialize_block(params, k + 1), needle)
        straddling = 1 if params.symmetric and k >= 1 else 0
        assert len(found) == b ** (k + 1) + straddling
        assert set(recursive_copy_positions(params, k)) <= set(found)
        assert len(spurious_copy_positions(params, k)) == straddling


def test_periodic_occurrences_wrap_around(chacon_like):
    block = materialize_block(chacon_like, 1)
    assert occurrences(block, Word.from_str("00"), periodic=True) == [2]
    assert occurrences(block, Word.from_str("00")) == []


def test_occurrences_rejects_long_needle(chacon_like):
    with pytest.raises(SpanError):
        occurrences(materialize_block(chacon_like, 1), Word.from_str("01001"))


def test_occurrence_gaps(chacon_like):
    b1 = materialize_block(chacon_like, 1).as_word()
    assert occurrence_gaps(materialize_block(chacon_like, 3), b1 + SPACER + b1) == (7, 13)
    assert occurrence_gaps(materialize_block(chacon_like, 1), Word.from_str("0")) == (1, 2)
    b2 = materialize_block(chacon_like, 2)
    assert occurrence_gaps(b2, b2.as_word()) == (13, 13)


def test_occurrence_gaps_without_occurrence(chacon_like):
    with pytest.raises(OccurrenceError):
        occurrence_gaps(materialize_block(chacon_like, 2), Word.from_str("11"))


def test_is_valid_word(chacon_like):
    assert is_valid_word(chacon_like, Word.from_str("0101010"))
    assert is_valid_word(chacon_like, Word.from_str("00100"))
    assert not is_valid_word(chacon_like, Word.from_str("11"))
    assert not is_valid_word(chacon_like, Word.from_str("000"))


def test_factor_set(chacon_like):
    factors = factor_set(materialize_block(chacon_like, 2), 2)
    assert {str(w) for w in factors} == {"00", "01", "10"}
    with pytest.raises(ConstraintError):
        factor_set(materialize_block(chacon_like, 2), 0)


@pytest.mark.parametrize("a, b", FAMILIES)
def test_stabilization(a, b):
    params = make_params(a, b)
    for length in (1, 3, 7, 10):
        assert stabilization_check(params, length)


def test_stabilization_compares_factor_sets(monkeypatch, chacon_like):
    spy = MagicMock(wraps=factor_set)
    monkeypatch.setattr("djr.words.factor_set", spy)
    assert stabilization_check(chacon_like, 4)
    assert [call.args[1] for call in spy.call_args_list] == [4, 4]
    assert [call.args[0].k for call in spy.call_args_list] == [4, 5]


@pytest.mark.parametrize("a, b", [(1, 2), (2, 3)])
@pytest.mark.parametrize("k", [2, 3])
def test_neighbor_copies(a, b, k):
    params = make_params(a, b)
    M = k + 3 if height(params, k + 3) <= 5_000_000 else k + 2
    result = check_neighbor_copies(params, k, M)
    assert result
    assert result.occurrences > 0
    assert result.counterexample is None


def test_neighbor_copies_preconditions(chacon_like):
    with pytest.raises(ConstraintError):
        check_neighbor_copies(chacon_like, 1, 4)
    with pytest.raises(ConstraintError):
        check_neighbor_copies(chacon_like, 2, 3)


def test_export_block(tmp_path: Path, chacon_like):
    path = export_block(materialize_block(chacon_like, 2), tmp_path / "out" / "b2.txt")
    assert path.read_text() == "0100101010010"
    assert load_word(path.read_text()) == materialize_block(chacon_like, 2).as_word()
