import logging
import math
from unittest.mock import MagicMock

import pytest

from djr.core.errors import ConstraintError, NoWitnessError, NotCoprimeError
from djr.modular import (
    SkewState,
    default_search_range,
    eventual_period,
    exact_residues,
    factored_witnesses,
    h_mod,
    h_mod_sequence,
    nq_set,
    skew_order,
    skew_orbit,
    skew_step,
    split_modulus,
    sweep_rows,
    verify_orbit_identity,
    verify_prime_relation,
)
from djr.words import height, make_params


@pytest.fixture
def b2():
    return make_params(1, 2)


@pytest.fixture
def b3():
    return make_params(2, 3)


@pytest.mark.parametrize(
    "q, b, state, expected",
    [
        (5, 2, (1, 0), (2, 1)),
        (5, 2, (2, 1), (4, 3)),
        (3, 2, (1, 0), (2, 1)),
    ],
)
def test_skew_step(q, b, state, expected):
    result = skew_step(SkewState(q=q, b=b, x=state[0], y=state[1]))
    assert (result.x, result.y) == expected


def test_skew_step_requires_coprime_multiplier():
    with pytest.raises(NotCoprimeError):
        skew_step(SkewState(q=4, b=2, x=1, y=0))


@pytest.mark.parametrize("x, y", [(2, 0), (1, 4), (-1, 0)])
def test_skew_state_validation(x, y):
    with pytest.raises(ConstraintError):
        SkewState(q=4, b=3, x=x, y=y)


def test_skew_orbit_prints_like_pairs():
    assert " ".join(str(s) for s in skew_orbit(5, 2, 2)) == "(2,1) (4,3)"


def test_h_mod(b2):
    assert list(h_mod_sequence(b2, 3, 4)) == [1, 0, 1, 0, 1]
    assert h_mod(b2, 5, 2) == 3
    assert all(r == 0 for r in h_mod_sequence(b2, 1, 20))
    with pytest.raises(ConstraintError):
        h_mod(b2, 0, 3)


@pytest.mark.parametrize("b", [2, 3])
def test_h_mod_matches_exact_heights(b):
    params = make_params(1, b)
    for q in range(1, 101):
        assert list(h_mod_sequence(params, q, 200)) == exact_residues(params, q, 200)


@pytest.mark.parametrize("b", [2, 3])
def test_orbit_identity(b):
    params = make_params(1, b)
    for q in range(2, 51):
        if math.gcd(q, b) != 1:
            continue
        assert verify_orbit_identity(params, q, 500)
        orbit = skew_orbit(q, b, 50)
        for k, state in enumerate(orbit, start=1):
            assert state.x == pow(b, k, q)
            assert state.y == height(params, k - 1) % q


def test_orbit_identity_rejects_shared_factor(b2):
    with pytest.raises(NotCoprimeError):
        verify_orbit_identity(b2, 4, 10)


def test_skew_order_small_case():
    result = skew_order(2, 3)
    assert result.orbit_period == 2
    assert result.permutation_order % result.orbit_period == 0


def test_multiplicative_order_is_only_computed_for_debug_logs(monkeypatch, caplog):
    order = MagicMock(return_value=4)
    monkeypatch.setattr("djr.modular.n_order", order)

    with caplog.at_level(logging.INFO, logger="djr.modular"):
        skew_order(5, 2)
    order.assert_not_called()

    with caplog.at_level(logging.DEBUG, logger="djr.modular"):
        skew_order(5, 2)
    order.assert_called_once_with(2, 5)
    assert "ord_q(b)=4" in caplog.text


@pytest.mark.parametrize("b", [2, 3])
def test_orbit_period_divides_permutation_order(b):
    params = make_params(1, b)
    for q in range(2, 51):
        if math.gcd(q, b) != 1:
            continue
        result = skew_order(q, b)
        assert result.orbit_period >= 1
        assert result.permutation_order % result.orbit_period == 0
        n = result.orbit_period
        residues = h_mod_sequence(params, q, 3 * n)
        for s in (1, 2, 3):
            assert residues[s * n - 1] == 0


def test_eventual_period():
    # coprime case: purely periodic with the orbit period
    assert eventual_period(5, 2) == (0, skew_order(5, 2).orbit_period)
    preperiod, period = eventual_period(4, 2)
    assert preperiod >= 1
    assert period >= 1


def test_nq_set(b2):
    assert nq_set(b2, 3, 6) == [0, 2, 4, 6]
    assert nq_set(b2, 2, 30) == list(range(31))
    with pytest.raises(ConstraintError):
        nq_set(b2, 1, 5)


@pytest.mark.parametrize("b", [2, 3])
def test_nq_set_is_never_sparse(b):
    params = make_params(1, b)
    for q in range(2, 101):
        assert len(nq_set(params, q, 10_000)) >= 3


def test_split_modulus():
    assert split_modulus(2, 6) == (2, 3)
    assert split_modulus(3, 9) == (9, 1)
    assert split_modulus(2, 5) == (1, 5)


def test_prime_relation_examples(b2, b3):
    assert verify_prime_relation(b2, 2, 50) == list(range(51))
    assert verify_prime_relation(b2, 6, 200)
    witnesses = verify_prime_relation(b3, 9, 40)
    assert set(range(1, 41)) <= set(witnesses)


@pytest.mark.parametrize("b", [2, 3])
def test_prime_relation_for_all_small_moduli(b):
    params = make_params(1, b)
    for q in range(2, 101):
        witnesses = verify_prime_relation(params, q, 10_000)
        assert len(witnesses) >= 3
        assert set(factored_witnesses(params, q, 10_000)) <= set(witnesses)


def test_witness_gaps_are_bounded(b2):
    for q in (3, 5, 6, 7, 12):
        _, coprime = split_modulus(2, q)
        bound = skew_order(coprime, 2).permutation_order if coprime > 1 else 1
        witnesses = verify_prime_relation(b2, q, 2000)
        tail = [w for w in witnesses if w >= 100]
        gaps = [nxt - cur for cur, nxt in zip(tail, tail[1:])]
        assert max(gaps) <= bound


def test_prime_relation_without_witness_raises(b2):
    # h_1 = 3 and h_2 = 13 are both != 1 mod 5
    with pytest.raises(NoWitnessError) as info:
        verify_prime_relation(b2, 5, 1)
    assert info.value.k_max == 1


def test_default_search_range(b2):
    assert default_search_range(b2, 5) == 10 * 5 * skew_order(5, 2).permutation_order
    assert default_search_range(b2, 8) == 10_000
    assert verify_prime_relation(b2, 5)


def test_sweep_rows(b2):
    rows = sweep_rows(b2, [3], 2)
    assert rows == [
        {"q": 3, "b": 2, "k": 0, "h_k_mod_q": 1, "in_Nq": 1},
        {"q": 3, "b": 2, "k": 1, "h_k_mod_q": 0, "in_Nq": 0},
        {"q": 3, "b": 2, "k": 2, "h_k_mod_q": 1, "in_Nq": 1},
    ]
