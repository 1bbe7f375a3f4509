from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from fxchain.bitgrowth import (growth_at_step, oracle_bit_length, oracle_overflow_step,
                               overflow_step, profile, steps_between_overflows,
                               worst_case_result)

EIGHT_BIT_POSITIONS = [1, 2, 4, 8, 16, 32, 64, 128, 257, 514, 1028, 2056, 4112, 8224]


def brute_positions(N, steps):
    """Add the all-ones operand one step at a time and watch the bit length."""
    M = 2 ** (N + 1) - 1
    out, prev = [], M.bit_length()
    for s in range(1, steps + 1):
        bl = ((s + 1) * M).bit_length()
        if bl > prev:
            out.append(s)
        prev = bl
    return out


def first_step_reaching(N, bits):
    """Least s >= 1 with oracle_bit_length(N, s) >= bits, by bisection."""
    lo, hi = 1, 1
    while oracle_bit_length(N, hi) < bits:
        hi *= 2
    while lo < hi:
        mid = (lo + hi) // 2
        if oracle_bit_length(N, mid) >= bits:
            hi = mid
        else:
            lo = mid + 1
    return lo


@pytest.mark.parametrize("N, k, expected", [(7, 1, 255), (7, 4, 2047), (0, 1, 1)])
def test_worst_case_result(N, k, expected):
    assert worst_case_result(N, k) == expected


def test_worst_case_result_is_geometric_sum():
    for N in range(6):
        for k in range(1, 6):
            assert worst_case_result(N, k) == sum(2 ** i for i in range(N + k))


@pytest.mark.parametrize("N, k, expected", [(7, 3, 4), (7, 1, 1), (7, 8, 128)])
def test_steps_between_overflows(N, k, expected):
    assert steps_between_overflows(N, k) == expected


def test_gap_at_k8_is_one_more_than_formula():
    assert EIGHT_BIT_POSITIONS[8] - EIGHT_BIT_POSITIONS[7] == 129
    assert steps_between_overflows(7, 8) == 128


@pytest.mark.parametrize("N, n, expected", [(7, 4, 8), (7, 9, 257), (7, 14, 8224), (0, 3, 8)])
def test_overflow_step(N, n, expected):
    assert overflow_step(N, n) == expected


@pytest.mark.parametrize("N, s, expected", [(7, 0, 8), (7, 1, 9), (7, 257, 17)])
def test_oracle_bit_length(N, s, expected):
    assert oracle_bit_length(N, s) == expected


@pytest.mark.parametrize("N, s, expected", [(7, 0, 0), (7, 3, 2), (7, 10000, 14)])
def test_growth_at_step(N, s, expected):
    assert growth_at_step(N, s) == expected


def test_profile_eight_bit_operands():
    p = profile(7, 10000)
    assert list(p.overflow_positions) == EIGHT_BIT_POSITIONS
    assert list(p.bit_lengths) == list(range(9, 23))
    assert list(p.ks) == list(range(1, 15))


@pytest.mark.parametrize("N, steps, expected", [(7, 3, [1, 2]), (0, 10, [1, 3, 7])])
def test_profile_small(N, steps, expected):
    assert list(profile(N, steps).overflow_positions) == expected


def test_profile_matches_stepwise_definition():
    for N in range(0, 6):
        for steps in (1, 2, 7, 50, 300):
            expected = [s for s in range(1, steps + 1)
                        if growth_at_step(N, s) > growth_at_step(N, s - 1)]
            assert list(profile(N, steps).overflow_positions) == expected
            assert list(profile(N, steps).overflow_positions) == brute_positions(N, steps)


@pytest.mark.parametrize("fn", [worst_case_result, steps_between_overflows, overflow_step])
def test_index_must_be_positive(fn):
    with pytest.raises(ValueError):
        fn(7, 0)
    with pytest.raises(ValueError):
        fn(-1, 1)


def test_bad_steps_rejected():
    with pytest.raises(ValueError):
        profile(7, 0)
    with pytest.raises(ValueError):
        oracle_bit_length(7, -1)


def test_formula_matches_oracle_exhaustively():
    for N in range(1, 13):
        for n in range(1, 25):
            assert overflow_step(N, n) == first_step_reaching(N, N + 1 + n)


def test_oracle_closed_form_matches_search():
    for N in range(0, 8):
        for n in range(1, 10):
            assert oracle_overflow_step(N, n) == first_step_reaching(N, N + 1 + n)


def test_formula_diverges_from_oracle_at_n0():
    for n in range(1, 20):
        assert overflow_step(0, n) == 2 ** n
        assert oracle_overflow_step(0, n) == 2 ** n - 1


def test_spacing_agrees_with_step_formula():
    for N in range(1, 13):
        for k in range(1, 21):
            d = overflow_step(N, k + 1) - overflow_step(N, k) - steps_between_overflows(N, k)
            assert 0 <= d <= 1


@given(st.integers(0, 80), st.integers(1, 80))
def test_strictly_increasing(N, n):
    assert overflow_step(N, n + 1) > overflow_step(N, n)


@given(st.integers(1, 60))
def test_doubling_prefix(N):
    assert [overflow_step(N, n) for n in range(1, N + 2)] == [2 ** i for i in range(N + 1)]


@given(st.integers(0, 40), st.integers(1, 3000))
def test_one_bit_per_overflow(N, steps):
    p = profile(N, steps)
    assert all(b - a == 1 for a, b in zip(p.bit_lengths, p.bit_lengths[1:]))
    if p.bit_lengths:
        assert p.bit_lengths[0] == N + 2
        assert p.overflow_positions[0] == 1


@given(st.integers(1, 100), st.integers(1, 100))
def test_exact_for_wide_operands(N, n):
    exact = Fraction(2 ** (N + n), 2 ** (N + 1) - 1)
    assert overflow_step(N, n) == exact.numerator // exact.denominator
    assert overflow_step(N, n) == oracle_overflow_step(N, n)


def test_float_arithmetic_would_lose_the_answer():
    # 2**61 - 1 is not a double, so a float evaluation collapses to 2**69
    N, n = 60, 70
    assert int(2.0 ** (N + n) / (2.0 ** (N + 1) - 1)) == 2 ** 69
    assert overflow_step(N, n) == 2 ** 69 + 2 ** 8
    assert overflow_step(N, n) == oracle_overflow_step(N, n)
