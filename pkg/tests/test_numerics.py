from fractions import Fraction as F

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spaceable import numerics as nx
from spaceable.numerics import Comparison

import oracles


def contains_mp(iv: nx.Interval, x, slack=mpmath.mpf(10) ** -40) -> bool:
    # mpmath works in binary floating point, so exact rational endpoints get a tiny slack
    return oracles.mpf(iv.lo) - slack <= x <= oracles.mpf(iv.hi) + slack


rationals = st.fractions(min_value=F(-50), max_value=F(50), max_denominator=60)
positive = st.fractions(min_value=F(1, 40), max_value=F(20), max_denominator=40)
exponents = st.fractions(min_value=F(-3), max_value=F(3), max_denominator=12)


def test_parse_and_format():
    assert nx.parse_rational("3/4") == F(3, 4)
    assert nx.parse_rational("-7") == F(-7)
    assert nx.format_rational(F(6, 8)) == "3/4"
    assert nx.format_rational(2) == "2/1"
    for bad in ["0.5", "1e3", "", "1/0", "1/-2", "a/b", "1 /2"]:
        with pytest.raises(ValueError):
            nx.parse_rational(bad)


def test_exact_leaf_encloses_to_itself():
    iv = nx.enclose(F(3, 4), F(1, 10))
    assert (iv.lo, iv.hi) == (F(3, 4), F(3, 4))


def test_zeta2_enclosure():
    iv = nx.enclose(nx.zeta(2), F(1, 10**6))
    assert iv.width <= F(1, 10**6)
    assert contains_mp(iv, mpmath.pi**2 / 6)


def test_zeta_against_integral_test_bracket():
    # the package uses an Euler-Maclaurin enclosure; the oracle only the integral test
    for s in [F(11, 10), F(3, 2), F(2), F(7, 3), F(5)]:
        lo, hi = oracles.zeta_integral_bracket(s, 2000)
        iv = nx.enclose(nx.zeta(s), F(1, 2**40))
        assert oracles.mpf(iv.hi) >= lo and oracles.mpf(iv.lo) <= hi
        assert contains_mp(iv, oracles.zeta(s))


def test_power_enclosure():
    iv = nx.enclose(nx.power(2, F(-3, 2)), F(1, 10**9))
    assert contains_mp(iv, mpmath.mpf(2) ** mpmath.mpf(-1.5))
    assert abs(float(iv.lo) - 0.3535533905932738) < 1e-9


def test_exact_roots_stay_rational():
    assert nx.power(F(9, 4), F(1, 2)) == nx.const(F(3, 2))
    assert nx.power(8, F(-2, 3)) == nx.const(F(1, 4))
    assert not nx.power(2, F(1, 2)).is_exact()


def test_compare_strict():
    assert nx.compare_strict(F(1, 2), F(1, 2) + F(1, 1000), F(1, 2**40)) is Comparison.LESS
    assert nx.compare_strict(nx.zeta(2), F(164, 100), F(1, 10**9)) is Comparison.GREATER
    x = nx.power(3, F(1, 3))
    assert nx.compare_strict(x, F(1, 2), F(1, 2**30)) is Comparison.GREATER
    assert nx.compare_strict(F(1, 3), F(1, 3), F(1, 2**30)) is Comparison.INCONCLUSIVE


def test_pseries_tail_bound_values():
    assert nx.pseries_tail_bound(2, 10) == nx.const(F(1, 10))
    assert nx.pseries_tail_bound(2, 1) == nx.const(1)
    assert nx.pseries_tail_bound(F(3, 2), 100) == nx.const(F(1, 5))
    brute = sum(1 / mpmath.mpf(r) ** 2 for r in range(11, 200000))
    assert brute <= 0.1
    with pytest.raises(ValueError):
        nx.pseries_tail_bound(1, 10)


@pytest.mark.parametrize("s,N", [(F(2), 10), (F(3, 2), 100), (F(6, 5), 50), (F(4), 3)])
def test_pseries_tail_bound_dominates_true_tail(s, N):
    tail = oracles.zeta(s) - mpmath.fsum(mpmath.mpf(r) ** -oracles.mpf(s) for r in range(1, N + 1))
    bound = nx.enclose(nx.pseries_tail_bound(s, N), F(1, 2**50))
    assert tail <= oracles.mpf(bound.lo)


def test_certify_le_equalities_after_expansion():
    r = nx.power(2, F(1, 2))
    a = nx.mul(nx.add(1, r), nx.power(3, F(1, 2)))
    b = nx.add(nx.power(3, F(1, 2)), nx.power(6, F(1, 2)))
    assert nx.certify_le(a, b) and nx.certify_le(b, a)
    assert nx.expands_to_zero(nx.add(nx.mul(nx.power(2, F(1, 2)), nx.power(2, F(-3, 2))), F(-1, 2)))
    assert not nx.certify_le(nx.add(b, F(1, 10**6)), a)


def test_precision_error_on_impossible_width():
    with pytest.raises(nx.PrecisionError):
        nx.enclose(nx.power(2, F(1, 2)), F(1, 2**10000))


@settings(max_examples=60, deadline=None)
@given(rationals, rationals)
def test_arithmetic_matches_fractions(a, b):
    assert nx.add(a, b) == nx.const(a + b)
    assert nx.mul(a, b) == nx.const(a * b)


@settings(max_examples=60, deadline=None)
@given(positive, exponents)
def test_power_enclosure_contains_true_value(x, e):
    eps = F(1, 2**30)
    iv = nx.enclose(nx.power(x, e), eps)
    assert iv.width <= eps
    assert contains_mp(iv, oracles.mpf(x) ** oracles.mpf(e))


@settings(max_examples=40, deadline=None)
@given(positive, exponents, positive)
def test_enclosures_nest_under_refinement(x, e, y):
    expr = nx.add(nx.power(x, e), nx.mul(y, nx.power(y, F(1, 3))))
    coarse = nx.enclose(expr, F(1, 2**10))
    fine = nx.enclose(expr, F(1, 2**40))
    assert coarse.lo <= fine.lo <= fine.hi <= coarse.hi


@settings(max_examples=40, deadline=None)
@given(positive, exponents)
def test_json_round_trip(x, e):
    expr = nx.add(nx.mul(3, nx.power(x, e)), nx.zeta(F(5, 2)), F(1, 7))
    assert nx.expr_from_json(nx.expr_to_json(expr)) == expr


@settings(max_examples=40, deadline=None)
@given(positive, exponents)
def test_abs_and_sign(x, e):
    v = nx.mul(-1, nx.power(x, e))
    iv = nx.enclose(nx.abs_(v), F(1, 2**30))
    assert iv.lo >= 0
    assert nx.compare_strict(v, 0, F(1, 2**60)) is Comparison.LESS
