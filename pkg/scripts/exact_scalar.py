"""Exact scalars in Q or a real quadratic field Q(sqrt d), and polynomials over them.

Numbers are stored as p + q sqrt(d) with Fraction parts and d squarefree.
Rationals carry d = 0 and combine with any field; mixing two different
square roots is an error. Polynomials in s are sympy polynomials over QQ or
QQ<sqrt d>; `to_sympy` and `from_sympy` move numbers between the two worlds.
"""

from __future__ import annotations

import ast
import functools
import logging
import math
import re
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

import numpy as np
import sympy

logger = logging.getLogger(__name__)

MAX_SQUAREFREE_INPUT = 10**14

Number = Union[int, Fraction, "QuadraticNumber"]


def _squarefree_split(value: int) -> tuple[int, int]:
    """Write value = f^2 * d with d squarefree; returns (f, d)."""
    if value <= 0:
        raise ValueError(f"radicand must be positive: {value}")
    if value > MAX_SQUAREFREE_INPUT:
        raise ValueError(f"radicand {value} too large to reduce")
    factor, rest = 1, 1
    for prime, exponent in sympy.factorint(value).items():
        factor *= prime ** (exponent // 2)
        rest *= prime ** (exponent % 2)
    return factor, rest


def integer_root(value: int, k: int) -> Optional[int]:
    """Exact k-th root of a nonnegative integer, or None."""
    if value < 0:
        return None
    root, exact = sympy.integer_nthroot(value, k)
    return int(root) if exact else None


@functools.total_ordering
class QuadraticNumber:
    """p + q sqrt(d), exact."""

    __slots__ = ("p", "q", "d")

    def __init__(self, p: Union[int, Fraction, str] = 0, q: Union[int, Fraction, str] = 0, d: int = 0):
        p, q = Fraction(p), Fraction(q)
        if q != 0:
            if d < 2:
                raise ValueError(f"square root part needs d >= 2, got {d}")
            factor, d = _squarefree_split(d)
            q *= factor
            if d == 1:
                p, q, d = p + q, Fraction(0), 0
        else:
            d = 0
        self.p, self.q, self.d = p, q, d

    @classmethod
    def coerce(cls, value: Number) -> "QuadraticNumber":
        if isinstance(value, QuadraticNumber):
            return value
        if isinstance(value, (int, Fraction)):
            return cls(value)
        if isinstance(value, str):
            return parse_exact(value)
        raise TypeError(f"cannot use {type(value).__name__} as an exact scalar")

    @classmethod
    def sqrt_of(cls, value: Union[int, Fraction]) -> "QuadraticNumber":
        value = Fraction(value)
        if value < 0:
            raise ValueError("square root of a negative number")
        root = nth_root(cls(value), 2)
        return root

    def _field(self, other: "QuadraticNumber") -> int:
        if self.d and other.d and self.d != other.d:
            raise ValueError(f"mixed quadratic fields sqrt{self.d} and sqrt{other.d}")
        return self.d or other.d

    @property
    def is_rational(self) -> bool:
        return self.q == 0

    def to_fraction(self) -> Fraction:
        if not self.is_rational:
            raise ValueError(f"{self} is irrational")
        return self.p

    def conjugate(self) -> "QuadraticNumber":
        return QuadraticNumber(self.p, -self.q, self.d)

    def norm(self) -> Fraction:
        return self.p * self.p - self.q * self.q * self.d

    def sign(self) -> int:
        sign_p = (self.p > 0) - (self.p < 0)
        sign_q = (self.q > 0) - (self.q < 0)
        if sign_q == 0 or sign_p == sign_q:
            return sign_p or sign_q
        if sign_p == 0:
            return sign_q
        return sign_p if self.p * self.p > self.q * self.q * self.d else sign_q

    def __float__(self) -> float:
        if self.is_rational:
            return float(self.p)
        return float(self.p) + float(self.q) * math.sqrt(self.d)

    def __bool__(self) -> bool:
        return self.p != 0 or self.q != 0

    def __neg__(self) -> "QuadraticNumber":
        return QuadraticNumber(-self.p, -self.q, self.d)

    def __abs__(self) -> "QuadraticNumber":
        return -self if self.sign() < 0 else self

    def __add__(self, other: Number) -> "QuadraticNumber":
        try:
            other = QuadraticNumber.coerce(other)
        except TypeError:
            return NotImplemented
        return QuadraticNumber(self.p + other.p, self.q + other.q, self._field(other))

    __radd__ = __add__

    def __sub__(self, other: Number) -> "QuadraticNumber":
        try:
            other = QuadraticNumber.coerce(other)
        except TypeError:
            return NotImplemented
        return QuadraticNumber(self.p - other.p, self.q - other.q, self._field(other))

    def __rsub__(self, other: Number) -> "QuadraticNumber":
        return QuadraticNumber.coerce(other) - self

    def __mul__(self, other: Number) -> "QuadraticNumber":
        try:
            other = QuadraticNumber.coerce(other)
        except TypeError:
            return NotImplemented
        d = self._field(other)
        return QuadraticNumber(
            self.p * other.p + self.q * other.q * d,
            self.p * other.q + self.q * other.p,
            d,
        )

    __rmul__ = __mul__

    def __truediv__(self, other: Number) -> "QuadraticNumber":
        try:
            other = QuadraticNumber.coerce(other)
        except TypeError:
            return NotImplemented
        if not other:
            raise ZeroDivisionError("division by an exact zero")
        numerator = self * other.conjugate()
        return QuadraticNumber(numerator.p / other.norm(), numerator.q / other.norm(), numerator.d)

    def __rtruediv__(self, other: Number) -> "QuadraticNumber":
        return QuadraticNumber.coerce(other) / self

    def __pow__(self, exponent: int) -> "QuadraticNumber":
        if not isinstance(exponent, int):
            return NotImplemented
        base = self if exponent >= 0 else QuadraticNumber(1) / self
        result, power, remaining = QuadraticNumber(1), base, abs(exponent)
        while remaining:
            if remaining & 1:
                result = result * power
            power = power * power
            remaining >>= 1
        return result

    def __eq__(self, other) -> bool:
        try:
            other = QuadraticNumber.coerce(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self.p == other.p and self.q == other.q and (self.q == 0 or self.d == other.d)

    def __lt__(self, other: Number) -> bool:
        return (self - other).sign() < 0

    def __hash__(self) -> int:
        if self.is_rational:
            return hash(self.p)
        return hash((self.p, self.q, self.d))

    def __repr__(self) -> str:
        return f"QuadraticNumber({self})"

    def __str__(self) -> str:
        if self.is_rational:
            return str(self.p)
        radical = f"{abs(self.q)}*sqrt({self.d})" if abs(self.q) != 1 else f"sqrt({self.d})"
        if self.p == 0:
            return radical if self.q > 0 else f"-{radical}"
        return f"{self.p}{'+' if self.q > 0 else '-'}{radical}"


def nth_root(value: Number, k: int) -> Optional[QuadraticNumber]:
    """The positive real k-th root when it lies in Q or a quadratic field, else None."""
    value = QuadraticNumber.coerce(value)
    if k < 1:
        raise ValueError(f"root degree must be positive: {k}")
    if value.sign() <= 0:
        return QuadraticNumber(0) if not value else None
    if k == 1:
        return value
    if value.is_rational:
        fraction = value.p
        scaled = fraction.numerator * fraction.denominator ** (k - 1)
        root = integer_root(scaled, k)
        if root is not None:
            return QuadraticNumber(Fraction(root, fraction.denominator))
        if k == 2:
            return QuadraticNumber(0, Fraction(1, fraction.denominator), scaled)
    elif k == 2:
        norm_root = nth_root(value.norm(), 2)
        if norm_root is not None and norm_root.is_rational:
            for candidate in ((value.p + norm_root.p) / 2, (value.p - norm_root.p) / 2):
                u = nth_root(candidate, 2) if candidate > 0 else None
                if u is None or not u.is_rational:
                    continue
                v = value.q / (2 * u.p)
                root = QuadraticNumber(u.p, v, value.d)
                if root * root == value:
                    return abs(root)
    if k % 2 == 0 and k > 2:
        half = nth_root(value, 2)
        return nth_root(half, k // 2) if half is not None else None
    return None


_SQRT_SHORTHAND = re.compile(r"(?:sqrt|√)\s*(\d+)")
_IMPLICIT_PRODUCT = re.compile(r"([\d)])\s*sqrt")


def parse_exact(text: str) -> QuadraticNumber:
    """Parse strings like "3/2", "(1+sqrt5)/2", "2-3*sqrt(5)" or "0.9"."""
    source = _SQRT_SHORTHAND.sub(r"sqrt(\1)", text.strip())
    source = _IMPLICIT_PRODUCT.sub(r"\1*sqrt", source)
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse exact scalar {text!r}") from exc
    return _evaluate(tree.body, text)


def _evaluate(node: ast.AST, text: str) -> QuadraticNumber:
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return QuadraticNumber(Fraction(repr(node.value)) if isinstance(node.value, float) else node.value)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        operand = _evaluate(node.operand, text)
        return -operand if isinstance(node.op, ast.USub) else operand
    if isinstance(node, ast.BinOp):
        left = _evaluate(node.left, text)
        if isinstance(node.op, ast.Pow):
            exponent = _evaluate(node.right, text)
            if not exponent.is_rational or exponent.p.denominator != 1:
                raise ValueError(f"only integer powers are exact in {text!r}")
            return left ** int(exponent.p)
        right = _evaluate(node.right, text)
        operations = {ast.Add: left.__add__, ast.Sub: left.__sub__, ast.Mult: left.__mul__, ast.Div: left.__truediv__}
        for op_type, operation in operations.items():
            if isinstance(node.op, op_type):
                return operation(right)
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id == "sqrt" and len(node.args) == 1:
        radicand = _evaluate(node.args[0], text)
        root = nth_root(radicand, 2)
        if root is None:
            raise ValueError(f"sqrt({radicand}) is not in a quadratic field")
        return root
    raise ValueError(f"unsupported expression in exact scalar {text!r}")


# ---------------------------------------------------------------------------
# Polynomials in s: sympy polynomials over QQ or QQ<sqrt d>
# ---------------------------------------------------------------------------

S = sympy.Symbol("s")


def to_sympy(value: Number) -> sympy.Expr:
    value = QuadraticNumber.coerce(value)
    rational = sympy.Rational(value.p.numerator, value.p.denominator)
    if value.is_rational:
        return rational
    return rational + sympy.Rational(value.q.numerator, value.q.denominator) * sympy.sqrt(value.d)


def _fraction(number: sympy.Expr) -> Fraction:
    if not number.is_Rational:
        raise ValueError(f"{number} is not rational")
    return Fraction(int(number.p), int(number.q))


def from_sympy(expr) -> QuadraticNumber:
    """Read p + q sqrt(d) back from a sympy number."""
    expr = sympy.expand(sympy.sympify(expr))
    if expr.is_Rational:
        return QuadraticNumber(_fraction(expr))
    radicals = {atom for atom in expr.atoms(sympy.Pow) if atom.exp == sympy.S.Half and atom.base.is_Integer}
    if len(radicals) != 1:
        raise ValueError(f"{expr} is not in a quadratic field")
    radical = radicals.pop()
    coefficients = sympy.Poly(expr, radical).all_coeffs()
    if len(coefficients) > 2:
        raise ValueError(f"{expr} is not in a quadratic field")
    q, p = coefficients if len(coefficients) == 2 else (sympy.S.Zero, coefficients[0])
    return QuadraticNumber(_fraction(p), _fraction(q), int(radical.base))


def exact_domain(values: Iterable[Number]) -> sympy.polys.domains.Domain:
    """QQ, or the algebraic field QQ<sqrt d> when a value involves sqrt d."""
    d = 0
    for value in values:
        value = QuadraticNumber.coerce(value)
        if value.d and d and value.d != d:
            raise ValueError(f"mixed quadratic fields sqrt{d} and sqrt{value.d}")
        d = value.d or d
    return sympy.QQ if not d else sympy.QQ.algebraic_field(sympy.sqrt(d))


def exact_poly(coefficients: Sequence[Number], domain: Optional[sympy.polys.domains.Domain] = None) -> sympy.Poly:
    """Polynomial in s from exact coefficients, lowest degree first."""
    coefficients = [QuadraticNumber.coerce(c) for c in coefficients]
    domain = exact_domain(coefficients) if domain is None else domain
    expr = sympy.Add(*(to_sympy(c) * S**power for power, c in enumerate(coefficients)))
    return sympy.Poly(expr, S, domain=domain)


@functools.lru_cache(maxsize=4096)
def exact_coefficients(poly: sympy.Poly) -> tuple[QuadraticNumber, ...]:
    """Coefficients as QuadraticNumbers, highest degree first."""
    return tuple(from_sympy(c) for c in poly.all_coeffs())


def evaluate(poly: sympy.Poly, s: Number) -> QuadraticNumber:
    """Exact value at s (Horner over the exact coefficients)."""
    result = QuadraticNumber(0)
    for coefficient in exact_coefficients(poly):
        result = result * s + coefficient
    return result


def float_coefficients(poly: sympy.Poly) -> list[float]:
    return [float(c) for c in poly.all_coeffs()]


def positive_roots(poly: sympy.Poly) -> tuple[list[QuadraticNumber], list[float]]:
    """Distinct positive real roots: exact ones in Q or Q(sqrt d), then float approximations of the rest.

    Linear factors over the coefficient field give exact roots, as do
    quadratic factors over QQ; every other factor is solved numerically.
    """
    if poly.is_zero:
        raise ValueError("the zero polynomial has every number as a root")
    exact: set[QuadraticNumber] = set()
    approximate: list[float] = []
    for factor, _ in poly.factor_list()[1]:
        if factor.degree() == 1:
            c1, c0 = exact_coefficients(factor)
            candidates = [-c0 / c1]
        elif factor.degree() == 2 and not factor.domain.is_Algebraic:
            candidates = [from_sympy(root) for root in sympy.roots(factor) if root.is_real]
        else:
            approximate.extend(_approximate_positive_roots(factor))
            continue
        exact.update(root for root in candidates if root > 0)
    if approximate:
        logger.info(f"Polynomial {poly.as_expr()} has roots only known approximately: {sorted(approximate)}")
    return sorted(exact), sorted(set(approximate))


def _approximate_positive_roots(factor: sympy.Poly) -> list[float]:
    # the norm over QQ also carries the conjugate factor's roots
    rational = factor.norm() if factor.domain.is_Algebraic else factor
    coefficients = float_coefficients(factor)
    scale = max(abs(c) for c in coefficients)
    roots = []
    for root in rational.real_roots():
        x = float(root)
        if x > 0 and abs(np.polyval(coefficients, x)) <= 1e-9 * scale * max(1.0, x) ** factor.degree():
            roots.append(x)
    return roots


def format_poly(poly: sympy.Poly) -> str:
    return str(poly.as_expr())
