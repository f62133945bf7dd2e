"""Tests for exact quadratic-field scalars and sympy polynomials over them."""

import math
from fractions import Fraction

import pytest
import sympy

from exact_scalar import (
    QuadraticNumber,
    evaluate,
    exact_coefficients,
    exact_domain,
    exact_poly,
    format_poly,
    from_sympy,
    integer_root,
    nth_root,
    parse_exact,
    positive_roots,
    to_sympy,
)

GOLDEN = QuadraticNumber(Fraction(1, 2), Fraction(1, 2), 5)


def s_poly(*coefficients):
    return exact_poly(coefficients)


def test_parsing():
    assert parse_exact("(1+sqrt5)/2") == GOLDEN
    assert parse_exact("(1+√5)/2") == GOLDEN
    assert parse_exact("0.9") == Fraction(9, 10)
    assert parse_exact("3/2").to_fraction() == Fraction(3, 2)
    assert parse_exact("2-3*sqrt(5)") == QuadraticNumber(2, -3, 5)
    assert parse_exact("3sqrt2") == QuadraticNumber(0, 3, 2)
    assert parse_exact("2**-1") == Fraction(1, 2)


def test_square_roots_are_reduced():
    assert parse_exact("sqrt(8)") == QuadraticNumber(0, 2, 2)
    four = parse_exact("sqrt(4)")
    assert four.is_rational and four == 2
    assert QuadraticNumber(0, 1, 12) == QuadraticNumber(0, 2, 3)
    assert QuadraticNumber.sqrt_of(Fraction(1, 4)) == Fraction(1, 2)
    with pytest.raises(ValueError):
        QuadraticNumber.sqrt_of(-1)


def test_golden_ratio_arithmetic():
    assert GOLDEN * GOLDEN == GOLDEN + 1
    assert 1 / GOLDEN == GOLDEN - 1
    assert GOLDEN**-2 == 2 - GOLDEN
    assert GOLDEN.conjugate() == 1 - GOLDEN
    assert GOLDEN.norm() == -1
    assert float(GOLDEN) == pytest.approx(1.6180339887)
    with pytest.raises(ValueError):
        GOLDEN.to_fraction()


def test_mixed_fields_are_rejected():
    with pytest.raises(ValueError, match="mixed quadratic fields"):
        parse_exact("sqrt2") + parse_exact("sqrt3")
    with pytest.raises(TypeError):
        QuadraticNumber.coerce(1.5)


def test_ordering_and_sign():
    assert parse_exact("sqrt2") < Fraction(3, 2)
    assert GOLDEN > Fraction(8, 5)
    assert GOLDEN < Fraction(13, 8)
    assert QuadraticNumber(-3, 1, 2).sign() == -1
    assert QuadraticNumber(1, -1, 2).sign() == -1
    assert abs(QuadraticNumber(1, -1, 2)) == QuadraticNumber(-1, 1, 2)
    assert sorted([GOLDEN, QuadraticNumber(1), QuadraticNumber(Fraction(3, 2))]) == [1, Fraction(3, 2), GOLDEN]


def test_division():
    assert QuadraticNumber(1, 1, 2) / QuadraticNumber(1, -1, 2) == QuadraticNumber(-3, -2, 2)
    with pytest.raises(ZeroDivisionError):
        GOLDEN / 0


def test_hash_matches_fractions():
    assert hash(QuadraticNumber(Fraction(3, 4))) == hash(Fraction(3, 4))
    assert len({QuadraticNumber(2), QuadraticNumber(Fraction(4, 2)), GOLDEN, GOLDEN * 1}) == 2


def test_formatting():
    assert str(GOLDEN) == "1/2+1/2*sqrt(5)"
    assert str(QuadraticNumber(2, -3, 5)) == "2-3*sqrt(5)"
    assert str(QuadraticNumber(0, -1, 2)) == "-sqrt(2)"
    assert str(QuadraticNumber(Fraction(-7, 3))) == "-7/3"


def test_nth_root():
    assert nth_root(Fraction(27, 8), 3) == Fraction(3, 2)
    assert nth_root(2, 3) is None
    assert nth_root(16, 4) == 2
    assert nth_root(QuadraticNumber(3, 2, 2), 2) == QuadraticNumber(1, 1, 2)
    assert nth_root(QuadraticNumber(6, 2, 5), 2) == QuadraticNumber(1, 1, 5)
    assert nth_root(-4, 2) is None
    assert nth_root(0, 5) == 0
    with pytest.raises(ValueError):
        nth_root(4, 0)


def test_integer_root():
    assert integer_root(1_000_000, 3) == 100
    assert integer_root(10, 2) is None
    assert integer_root(-4, 2) is None
    assert integer_root(3**40, 8) == 243


def test_sympy_round_trip():
    assert to_sympy(GOLDEN) == sympy.Rational(1, 2) + sympy.sqrt(5) / 2
    assert to_sympy(Fraction(-3, 4)) == sympy.Rational(-3, 4)
    assert from_sympy(sympy.Rational(1, 2) + sympy.sqrt(5) / 2) == GOLDEN
    assert from_sympy(sympy.sqrt(8)) == QuadraticNumber(0, 2, 2)
    assert from_sympy(sympy.Integer(3)) == 3
    with pytest.raises(ValueError):
        from_sympy(sympy.cbrt(2))
    with pytest.raises(ValueError):
        from_sympy(sympy.sqrt(2) + sympy.sqrt(3))


def test_exact_domain():
    assert exact_domain([1, Fraction(1, 2)]) == sympy.QQ
    assert exact_domain([GOLDEN, 2]).is_Algebraic
    with pytest.raises(ValueError, match="mixed quadratic fields"):
        exact_domain([parse_exact("sqrt2"), parse_exact("sqrt3")])


def test_polynomial_evaluation():
    p = s_poly(-1, -1, 1)
    assert p.domain == sympy.QQ
    assert evaluate(p, GOLDEN) == 0
    assert evaluate(p, 3) == 5
    assert format_poly(s_poly(0, -1)) == "-s"

    q = s_poly(-GOLDEN, 1)
    assert q.domain.is_Algebraic
    assert exact_coefficients(q) == (1, -GOLDEN)
    assert evaluate(q * q, GOLDEN) == 0
    assert evaluate(q, 1) == 1 - GOLDEN


def test_polynomial_gcd():
    assert s_poly(-1, 0, 1).gcd(s_poly(1, 2, 1)) == s_poly(1, 1)
    assert s_poly(2).gcd(s_poly(-1, 1)) == s_poly(1)
    assert s_poly().gcd(s_poly()).is_zero

    shared = s_poly(-GOLDEN, 1)
    assert (shared * s_poly(1, 1)).gcd(shared * s_poly(-2, 1)) == shared


def test_positive_roots():
    assert positive_roots(s_poly(2, -3, 1)) == ([1, 2], [])
    assert positive_roots(s_poly(-1, -1, 1)) == ([GOLDEN], [])
    assert positive_roots(s_poly(0, -1, 1)) == ([1], [])
    assert positive_roots(s_poly(1, 0, 1)) == ([], [])

    root2 = parse_exact("sqrt2")
    assert positive_roots(s_poly(1, -2 * root2, 1)) == ([root2 - 1, root2 + 1], [])


def test_positive_roots_without_closed_form():
    exact, approximate = positive_roots(s_poly(-2, 0, 0, 1))
    assert exact == []
    assert approximate == pytest.approx([2 ** (1 / 3)])

    # sqrt(phi) is not in Q(sqrt 5)
    exact, approximate = positive_roots(s_poly(-GOLDEN, 0, 1))
    assert exact == []
    assert approximate == pytest.approx([math.sqrt(float(GOLDEN))])

    with pytest.raises(ValueError):
        positive_roots(s_poly())


@pytest.mark.parametrize("text", ["abc", "sqrt(-1)", "2**0.5", "1/", "sqrt(2, 3)"])
def test_parse_errors(text):
    with pytest.raises(ValueError):
        parse_exact(text)
