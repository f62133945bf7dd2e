"""Exact algebra of orientation-preserving similarities x -> a x + b.

Words are applied left to right: z_{i1} z_{i2} ... z_{iL} first applies
phi_{i1}, then phi_{i2}, so its x-coefficient is prod a_i and its constant is
sum_i b_i prod_{j>i} a_j.
"""

from __future__ import annotations

import functools
import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np
import sympy
from pydantic import BaseModel, Field

from exact_scalar import (
    S,
    Number,
    QuadraticNumber,
    evaluate,
    exact_coefficients,
    exact_domain,
    exact_poly,
    float_coefficients,
    format_poly,
    nth_root,
    parse_exact,
    positive_roots,
)
from measure_core import AffineMap, PreconditionError

logger = logging.getLogger(__name__)

DEFAULT_STATE_CAP = 2_000_000


@dataclass(frozen=True)
class ExactAffineMap:
    """x -> a x + b with exact coefficients."""

    a: QuadraticNumber
    b: QuadraticNumber = field(default_factory=QuadraticNumber)

    def __post_init__(self):
        object.__setattr__(self, "a", QuadraticNumber.coerce(self.a))
        object.__setattr__(self, "b", QuadraticNumber.coerce(self.b))
        if not self.a:
            raise ValueError("an affine map needs a nonzero ratio")

    @classmethod
    def identity(cls) -> "ExactAffineMap":
        return cls(QuadraticNumber(1), QuadraticNumber(0))

    @classmethod
    def parse(cls, text: str) -> "ExactAffineMap":
        """Parse "a=3/2,b=0" or "a=(1+sqrt5)/2,b=1"; b defaults to 0."""
        values = {}
        for part in re.split(r",(?![^()]*\))", text):
            if not part.strip():
                continue
            key, sep, value = part.partition("=")
            if not sep or key.strip() not in ("a", "b"):
                raise ValueError(f"cannot parse map {text!r}; expected a=...,b=...")
            values[key.strip()] = parse_exact(value)
        if "a" not in values:
            raise ValueError(f"map {text!r} has no ratio a")
        return cls(values["a"], values.get("b", QuadraticNumber(0)))

    @classmethod
    def from_affine(cls, phi: AffineMap) -> "ExactAffineMap":
        """Exact copy of a floating map (binary floats are rationals)."""
        return cls(QuadraticNumber(Fraction(phi.ratio)), QuadraticNumber(Fraction(phi.translation)))

    def to_affine(self) -> AffineMap:
        return AffineMap(float(self.a), float(self.b))

    @property
    def orientation_preserving(self) -> bool:
        return self.a > 0

    def __call__(self, x: Number) -> QuadraticNumber:
        return self.a * x + self.b

    def compose(self, other: "ExactAffineMap") -> "ExactAffineMap":
        """self o other."""
        return ExactAffineMap(self.a * other.a, self.a * other.b + self.b)

    def __str__(self) -> str:
        return f"a={self.a},b={self.b}"


def compose(phi: ExactAffineMap, psi: ExactAffineMap) -> ExactAffineMap:
    """phi o psi = (a1 a2, a1 b2 + b1)."""
    return phi.compose(psi)


def parse_maps(text: str) -> list[ExactAffineMap]:
    """Semicolon separated maps, e.g. "a=2,b=0;a=2,b=1"."""
    return [ExactAffineMap.parse(chunk) for chunk in text.split(";") if chunk.strip()]


@dataclass(frozen=True)
class Word:
    """A nonempty word in the letters 0..k-1, printed 1-based as z1z2z2."""

    letters: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "letters", tuple(int(letter) for letter in self.letters))
        if not self.letters:
            raise ValueError("a word must be nonempty")
        if min(self.letters) < 0:
            raise ValueError("letters are nonnegative indices")

    @classmethod
    def parse(cls, text: str) -> "Word":
        letters = re.findall(r"z(\d+)", text)
        if not letters or "".join(f"z{letter}" for letter in letters) != text.replace(" ", ""):
            raise ValueError(f"cannot parse word {text!r}")
        return cls(tuple(int(letter) - 1 for letter in letters))

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def __str__(self) -> str:
        return "".join(f"z{letter + 1}" for letter in self.letters)

    def to_json(self) -> list[int]:
        return [letter + 1 for letter in self.letters]


def eval_word(word: Union[Word, Sequence[int]], assignment: Sequence[ExactAffineMap]) -> ExactAffineMap:
    """Apply the letters of the word left to right."""
    result = ExactAffineMap.identity()
    for letter in word:
        if not 0 <= letter < len(assignment):
            raise PreconditionError(f"letter z{letter + 1} has no assigned map")
        result = assignment[letter].compose(result)
    return result


# ---------------------------------------------------------------------------
# Freeness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FreeUpTo:
    length: int

    @property
    def is_free(self) -> bool:
        return True


@dataclass(frozen=True)
class Relation:
    """Two distinct words evaluating to the same map."""

    w: Word
    w_prime: Word

    @property
    def is_free(self) -> bool:
        return False


class RelationCertificate(BaseModel):
    w: list[int] = Field(..., description="First word, 1-based letters.")
    w_prime: list[int] = Field(..., description="Second word, 1-based letters.")
    maps: list[str] = Field(default_factory=list, description="The generators as a=...,b=... strings.")


def relation_certificate(relation: Relation, maps: Sequence[ExactAffineMap]) -> RelationCertificate:
    return RelationCertificate(w=relation.w.to_json(), w_prime=relation.w_prime.to_json(), maps=[str(m) for m in maps])


def check_free(
    maps: Sequence[ExactAffineMap], max_length: int, state_cap: int = DEFAULT_STATE_CAP
) -> Union[FreeUpTo, Relation]:
    """Enumerate words by length, then lexicographically, until two share a map.

    The earlier word in that order is reported first.
    """
    if not maps:
        raise PreconditionError("the generating set is empty")
    if max_length < 1:
        raise PreconditionError("maximal word length must be positive")
    total = sum(len(maps) ** length for length in range(1, max_length + 1))
    if total > state_cap:
        raise PreconditionError(f"{total} words exceed the state cap {state_cap}")

    seen: dict[ExactAffineMap, tuple[int, ...]] = {}
    frontier: list[tuple[tuple[int, ...], ExactAffineMap]] = [((), ExactAffineMap.identity())]
    for length in range(1, max_length + 1):
        next_frontier = []
        for letters, value in frontier:
            for letter, phi in enumerate(maps):
                word = letters + (letter,)
                image = phi.compose(value)
                earlier = seen.get(image)
                if earlier is not None:
                    logger.info(f"Relation found at length {length}: {Word(earlier)} = {Word(word)}")
                    return Relation(Word(earlier), Word(word))
                seen[image] = word
                next_frontier.append((word, image))
        frontier = next_frontier
        logger.debug(f"No relation among {len(seen)} words up to length {length}")
    return FreeUpTo(max_length)


@dataclass
class FreeExtension:
    free_set: list[ExactAffineMap]
    accepted: list[ExactAffineMap]
    rejected: list[tuple[ExactAffineMap, Relation]]


def greedy_free_extension(
    pool: Sequence[ExactAffineMap],
    free_set: Sequence[ExactAffineMap],
    max_length: int,
    state_cap: int = DEFAULT_STATE_CAP,
) -> FreeExtension:
    """Add each pool element whose addition keeps the set free up to max_length."""
    current = list(free_set)
    if current and not check_free(current, max_length, state_cap).is_free:
        raise PreconditionError("the starting set already satisfies a relation")
    accepted, rejected = [], []
    for gamma in pool:
        verdict = check_free(current + [gamma], max_length, state_cap)
        if verdict.is_free:
            current.append(gamma)
            accepted.append(gamma)
        else:
            rejected.append((gamma, verdict))
    logger.info(f"Greedy extension accepted {len(accepted)} of {len(pool)} candidates")
    return FreeExtension(current, accepted, rejected)


def power_for_separation(a: Number) -> int:
    """Smallest k >= 1 with |a|^k outside (1/2, 2)."""
    a = abs(QuadraticNumber.coerce(a))
    if a == 1:
        raise PreconditionError("|a| = 1 never leaves (1/2, 2)")
    if not a:
        raise PreconditionError("a must be nonzero")

    def inside(k: int) -> bool:
        return Fraction(1, 2) < a**k < 2

    k = max(1, math.ceil(1 / abs(math.log2(float(a)))))
    while inside(k):
        k += 1
    while k > 1 and not inside(k - 1):
        k -= 1
    return k


def implication_bound(r0: Union[Fraction, int, str], k: int) -> int:
    """ell = ceil(1 / r0^(2k)), so that ell copies of r0^(2k) have sum at least 1."""
    r0 = Fraction(r0)
    if not 0 < r0 < 1:
        raise ValueError(f"r0 must lie in (0, 1): {r0}")
    if k < 1:
        raise ValueError(f"k must be positive: {k}")
    contraction = r0 ** (2 * k)
    ell = math.ceil(1 / contraction)
    if ell * contraction < 1:
        raise ArithmeticError("ceiling bound failed")
    return ell


# ---------------------------------------------------------------------------
# Relations with one free parameter
# ---------------------------------------------------------------------------


class SolutionKind(str, Enum):
    EMPTY = "Empty"
    POINTS = "FinitePoints"
    LINE = "Line"
    CURVE = "Curve"
    ALL = "AllOfGPlus"


@dataclass
class RelationSolutionSet:
    """All gamma = (s, t) with s > 0 solving an alternating relation.

    The relation holds exactly when left_x(s) = right_x(s) and
    e(s) t + f(s) = 0. Lines are either vertical (s = s0) or, for a constant
    e and affine f, the graph t = -f(s)/e. The four polynomials are sympy
    polynomials in s over QQ or QQ<sqrt d>.
    """

    kind: SolutionKind
    left_x: sympy.Poly
    right_x: sympy.Poly
    e: sympy.Poly
    f: sympy.Poly
    points: list[tuple[QuadraticNumber, QuadraticNumber]] = field(default_factory=list)
    vertical_lines: list[QuadraticNumber] = field(default_factory=list)
    approximate_vertical_lines: list[float] = field(default_factory=list)
    approximate_points: list[tuple[float, float]] = field(default_factory=list)

    @property
    def has_graph(self) -> bool:
        """True when the set contains the graph t = -f(s)/e(s)."""
        return self.kind in (SolutionKind.CURVE, SolutionKind.LINE) and not self.e.is_zero and self.left_x == self.right_x

    def contains(self, gamma: ExactAffineMap) -> bool:
        s, t = gamma.a, gamma.b
        if s <= 0:
            return False
        return evaluate(self.left_x, s) == evaluate(self.right_x, s) and not (evaluate(self.e, s) * t + evaluate(self.f, s))

    def sample_points(self, count: int, rng: np.random.Generator) -> list[ExactAffineMap]:
        """Exact elements of the set; rational s wherever the set allows."""

        def rational(low: int, high: int) -> QuadraticNumber:
            return QuadraticNumber(Fraction(int(rng.integers(low, high)), int(rng.integers(1, 20))))

        if self.kind == SolutionKind.EMPTY:
            return []
        samples: list[ExactAffineMap] = []
        attempts = 0
        while len(samples) < count and attempts < 50 * count:
            attempts += 1
            choice = attempts % 3
            if self.kind == SolutionKind.ALL:
                samples.append(ExactAffineMap(rational(1, 60), rational(-40, 40)))
            elif choice == 0 and self.points:
                s, t = self.points[int(rng.integers(len(self.points)))]
                samples.append(ExactAffineMap(s, t))
            elif choice == 1 and self.vertical_lines:
                s = self.vertical_lines[int(rng.integers(len(self.vertical_lines)))]
                samples.append(ExactAffineMap(s, rational(-40, 40)))
            elif choice == 2 and self.has_graph:
                s = rational(1, 60)
                e_value = evaluate(self.e, s)
                if e_value:
                    samples.append(ExactAffineMap(s, -evaluate(self.f, s) / e_value))
            elif not (self.points or self.vertical_lines or self.has_graph):
                break
        return samples

    def describe(self) -> dict:
        return {
            "kind": self.kind.value,
            "e": format_poly(self.e),
            "f": format_poly(self.f),
            "points": [[str(s), str(t)] for s, t in self.points],
            "vertical_lines": [str(s) for s in self.vertical_lines],
            "approximate_vertical_lines": self.approximate_vertical_lines,
            "approximate_points": [list(point) for point in self.approximate_points],
        }


AlternatingInput = Sequence[Optional[ExactAffineMap]]


def _fixed_positions(maps: AlternatingInput) -> list[ExactAffineMap]:
    """Accept either phi_0, phi_2, ..., phi_2m or the full list with None in the gamma slots."""
    maps = list(maps)
    if not maps:
        raise PreconditionError("non-alternating input: empty side")
    if all(m is not None for m in maps):
        return maps
    if len(maps) % 2 == 0 or any(m is None for m in maps[0::2]) or any(m is not None for m in maps[1::2]):
        raise PreconditionError("non-alternating input: gamma must sit at every odd position")
    return maps[0::2]


def alternating_coefficients(
    fixed: Sequence[ExactAffineMap], domain: Optional[sympy.polys.domains.Domain] = None
) -> tuple[sympy.Poly, sympy.Poly, sympy.Poly]:
    """phi_0 gamma phi_2 ... gamma phi_2m as x -> A(s) x + E(s) t + F(s) with gamma = (s, t)."""
    if domain is None:
        domain = exact_domain(value for phi in fixed for value in (phi.a, phi.b))
    s = sympy.Poly(S, S, domain=domain)
    one, zero = exact_poly([1], domain), exact_poly([], domain)
    a_poly, e_poly, f_poly = one, zero, zero
    for position, phi in enumerate(fixed):
        if position:
            a_poly, e_poly, f_poly = a_poly * s, e_poly * s + one, f_poly * s
        ratio, shift = exact_poly([phi.a], domain), exact_poly([phi.b], domain)
        a_poly, e_poly, f_poly = a_poly * ratio, e_poly * ratio, f_poly * ratio + shift
    return a_poly, e_poly, f_poly


def relation_solution_set(left: AlternatingInput, right: AlternatingInput) -> RelationSolutionSet:
    """Classify the gammas solving phi_0 gamma phi_2 ... phi_2m = psi_0 gamma psi_2 ... psi_2n."""
    left_fixed, right_fixed = _fixed_positions(left), _fixed_positions(right)
    m, n = len(left_fixed) - 1, len(right_fixed) - 1
    domain = exact_domain(value for phi in left_fixed + right_fixed for value in (phi.a, phi.b))
    left_x, left_e, left_f = alternating_coefficients(left_fixed, domain)
    right_x, right_e, right_f = alternating_coefficients(right_fixed, domain)
    e, f = left_e - right_e, left_f - right_f
    product_left, product_right = exact_coefficients(left_x)[0], exact_coefficients(right_x)[0]
    build = functools.partial(_solution_set, left_x=left_x, right_x=right_x, e=e, f=f)

    if m != n:
        k = abs(m - n)
        ratio = product_right / product_left if m > n else product_left / product_right
        if ratio <= 0:
            return build(SolutionKind.EMPTY)
        s0 = nth_root(ratio, k)
        if s0 is None:
            return _solve_at_inexact_scale(build, ratio, k, e, f)
        e0, f0 = evaluate(e, s0), evaluate(f, s0)
        if e0:
            return build(SolutionKind.POINTS, points=[(s0, -f0 / e0)])
        if f0:
            return build(SolutionKind.EMPTY)
        return build(SolutionKind.LINE, vertical_lines=[s0])

    if product_left != product_right:
        return build(SolutionKind.EMPTY)

    if e.is_zero:
        if f.is_zero:
            return build(SolutionKind.ALL)
        exact, approximate = positive_roots(f)
        if not exact and not approximate:
            return build(SolutionKind.EMPTY)
        return build(SolutionKind.LINE, vertical_lines=exact, approximate_vertical_lines=approximate)

    exceptional, approximate = _common_positive_roots(e, f)
    kind = SolutionKind.LINE if e.degree() == 0 and f.degree() <= 1 else SolutionKind.CURVE
    return build(kind, vertical_lines=exceptional, approximate_vertical_lines=approximate)


def _solution_set(kind: SolutionKind, **fields) -> RelationSolutionSet:
    return RelationSolutionSet(kind=kind, **fields)


def _has_positive_root(poly: sympy.Poly) -> bool:
    if poly.degree() < 1:
        return False
    exact, approximate = positive_roots(poly)
    return bool(exact or approximate)


def _common_positive_roots(e: sympy.Poly, f: sympy.Poly) -> tuple[list[QuadraticNumber], list[float]]:
    common = e.gcd(f)
    if common.degree() < 1:
        return [], []
    return positive_roots(common)


def _solve_at_inexact_scale(build, ratio: QuadraticNumber, k: int, e: sympy.Poly, f: sympy.Poly) -> RelationSolutionSet:
    """s0 = ratio^(1/k) lies outside the field: decide e(s0) = 0 through gcd with s^k - ratio."""
    scale_poly = exact_poly([-ratio] + [0] * (k - 1) + [1], e.domain)
    s0 = float(ratio) ** (1.0 / k)
    e_vanishes = e.is_zero or _has_positive_root(scale_poly.gcd(e))
    f_vanishes = f.is_zero or _has_positive_root(scale_poly.gcd(f))
    logger.info(f"Scale s0 = {ratio}^(1/{k}) ~ {s0:.12g} is not in the field; solution set is approximate")
    if not e_vanishes:
        t0 = -float(np.polyval(float_coefficients(f), s0)) / float(np.polyval(float_coefficients(e), s0))
        return build(SolutionKind.POINTS, approximate_points=[(s0, t0)])
    if not f_vanishes:
        return build(SolutionKind.EMPTY)
    return build(SolutionKind.LINE, approximate_vertical_lines=[s0])


def canonical_alternating_form(
    word: Union[Word, Sequence[int]], assignment: Sequence[Optional[ExactAffineMap]], gamma_letter: int
) -> list[ExactAffineMap]:
    """Collapse runs of fixed letters and pad with identities so gamma alternates with fixed maps.

    Returns phi_0, phi_2, ..., phi_2m where m is the number of gamma letters.
    """
    fixed: list[ExactAffineMap] = [ExactAffineMap.identity()]
    for letter in word:
        if letter == gamma_letter:
            fixed.append(ExactAffineMap.identity())
            continue
        if not 0 <= letter < len(assignment) or assignment[letter] is None:
            raise PreconditionError(f"letter z{letter + 1} has no assigned map")
        fixed[-1] = assignment[letter].compose(fixed[-1])
    return fixed
