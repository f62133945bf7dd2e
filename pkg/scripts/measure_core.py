"""Discretized probability measures on the line and on the similarity group.

A measure is a sparse dyadic histogram: sorted integer cell indices with
positive masses. Level-n cell k of R is [k/2^n, (k+1)/2^n). A cell (k1, k2) of
G stands for the similarities x -> e^s x + t with (s, t) in the product cell
[k1/2^n, (k1+1)/2^n) x [k2/2^n, (k2+1)/2^n).

Measures are immutable once built and every operation here returns a new one.

Usage:
    from measure_core import DyadicMeasure1D, coarsen
    mu = DyadicMeasure1D.uniform(10)
    coarse = coarsen(mu, 3)
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal, Mapping, Union

import numpy as np
from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)

MAX_LEVEL_R = 26
MAX_LEVEL_G = 20
NORMALIZATION_TOLERANCE = 1e-9
MASS_FLOOR = 1e-15

_PAIR_OFFSET = 1 << 31
_PAIR_MASK = (1 << 32) - 1


class PreconditionError(ValueError):
    """An operation was called outside the inputs it is defined for."""


def _as_index_array(values) -> np.ndarray:
    return np.asarray(values, dtype=np.int64).reshape(-1)


def _as_mass_array(values) -> np.ndarray:
    return np.asarray(values, dtype=np.float64).reshape(-1)


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array)
    array.setflags(write=False)
    return array


def aggregate_cells(indices: np.ndarray, masses: np.ndarray, floor: float = 0.0):
    """Sum masses of repeated indices, sort, and drop cells at or below floor."""
    indices = _as_index_array(indices)
    masses = _as_mass_array(masses)
    if indices.size != masses.size:
        raise ValueError("indices and masses must have the same length")
    if indices.size == 0:
        return indices, masses
    unique, inverse = np.unique(indices, return_inverse=True)
    summed = np.bincount(inverse.reshape(-1), weights=masses, minlength=unique.size)
    keep = summed > floor
    return unique[keep], summed[keep]


def _pair_key(k1: np.ndarray, k2: np.ndarray) -> np.ndarray:
    k1 = _as_index_array(k1)
    k2 = _as_index_array(k2)
    if k2.size and (k2.min() < -_PAIR_OFFSET or k2.max() >= _PAIR_OFFSET):
        raise PreconditionError("translation index outside the supported range")
    return (k1 << 32) + (k2 + _PAIR_OFFSET)


def _unpair_key(key: np.ndarray):
    k2 = (key & _PAIR_MASK) - _PAIR_OFFSET
    k1 = (key - (k2 + _PAIR_OFFSET)) >> 32
    return k1, k2


def _level_shift(norm: float) -> int:
    """round(log2 norm) with ties toward zero."""
    exponent = math.log2(norm)
    magnitude = math.ceil(abs(exponent) - 0.5)
    return int(math.copysign(magnitude, exponent)) if magnitude else 0


# ---------------------------------------------------------------------------
# Similarities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AffineMap:
    """The similarity x -> ratio * x + translation (floating point)."""

    ratio: float
    translation: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.ratio) or not math.isfinite(self.translation):
            raise ValueError(f"Affine map coefficients must be finite: {self}")
        if self.ratio == 0:
            raise ValueError("Affine map ratio must be nonzero")

    @property
    def norm(self) -> float:
        return abs(self.ratio)

    @property
    def is_contracting(self) -> bool:
        return self.norm < 1

    @property
    def orientation_preserving(self) -> bool:
        return self.ratio > 0

    def __call__(self, x):
        return self.ratio * x + self.translation

    def compose(self, other: "AffineMap") -> "AffineMap":
        """self o other."""
        return AffineMap(
            self.ratio * other.ratio, self.ratio * other.translation + self.translation
        )

    def inverse(self) -> "AffineMap":
        return AffineMap(1.0 / self.ratio, -self.translation / self.ratio)

    def log_scale(self) -> tuple[float, float]:
        """Coordinates (s, t) with self(x) = e^s x + t."""
        if self.ratio <= 0:
            raise PreconditionError("Only orientation preserving maps have log-scale coordinates")
        return math.log(self.ratio), self.translation

    @classmethod
    def from_log_scale(cls, s: float, t: float) -> "AffineMap":
        return cls(math.exp(s), t)

    @classmethod
    def identity(cls) -> "AffineMap":
        return cls(1.0, 0.0)


# ---------------------------------------------------------------------------
# Measures on R
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DyadicMeasure1D:
    """Sparse level-n histogram of a probability measure on R."""

    level: int
    indices: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        if not 0 <= self.level <= MAX_LEVEL_R:
            raise PreconditionError(f"Level {self.level} outside 0..{MAX_LEVEL_R}")
        indices = _as_index_array(self.indices)
        masses = _as_mass_array(self.masses)
        if indices.size != masses.size:
            raise ValueError("indices and masses must have the same length")
        if indices.size == 0:
            raise ValueError("A measure needs at least one cell")
        if np.any(np.diff(indices) <= 0):
            raise ValueError("Cell indices must be strictly increasing")
        if np.any(masses <= 0) or not np.all(np.isfinite(masses)):
            raise ValueError("Cell masses must be positive and finite")
        object.__setattr__(self, "indices", _frozen(indices))
        object.__setattr__(self, "masses", _frozen(masses))

    @classmethod
    def from_arrays(cls, level: int, indices, masses, normalize: bool = True) -> "DyadicMeasure1D":
        masses = _as_mass_array(masses)
        if np.any(masses < 0):
            raise ValueError("Cell masses must be nonnegative")
        indices, masses = aggregate_cells(indices, masses)
        if normalize:
            indices, masses = _normalize(indices, masses)
        return cls(level, indices, masses)

    @classmethod
    def from_cells(cls, level: int, cells: Mapping[int, float], normalize: bool = True) -> "DyadicMeasure1D":
        return cls.from_arrays(level, list(cells.keys()), list(cells.values()), normalize)

    @classmethod
    def from_points(cls, points, level: int, weights=None) -> "DyadicMeasure1D":
        """Histogram of weighted points: point x falls in cell floor(x * 2^level)."""
        points = np.asarray(points, dtype=np.float64).reshape(-1)
        if weights is None:
            weights = np.full(points.size, 1.0 / max(points.size, 1))
        indices = np.floor(points * 2.0**level).astype(np.int64)
        return cls.from_arrays(level, indices, weights)

    @classmethod
    def uniform(cls, level: int, start: int = 0, stop: int | None = None) -> "DyadicMeasure1D":
        """Uniform on cells start..stop-1 (default: all of [0,1))."""
        stop = 2**level if stop is None else stop
        indices = np.arange(start, stop, dtype=np.int64)
        return cls(level, indices, np.full(indices.size, 1.0 / indices.size))

    @classmethod
    def dirac(cls, level: int, index: int = 0) -> "DyadicMeasure1D":
        return cls(level, np.array([index], dtype=np.int64), np.array([1.0]))

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.masses))

    @property
    def cells(self) -> dict[int, float]:
        return dict(zip(self.indices.tolist(), self.masses.tolist()))

    @property
    def support_bounds(self) -> tuple[float, float]:
        width = 2.0**-self.level
        return float(self.indices[0]) * width, float(self.indices[-1] + 1) * width

    def __len__(self) -> int:
        return int(self.indices.size)

    def midpoints(self) -> np.ndarray:
        return (self.indices + 0.5) / 2.0**self.level

    def mass_of_cell(self, index: int, level: int) -> float:
        """Mass of the level-`level` cell `index`."""
        parents = self.indices >> (self.level - level)
        return float(np.sum(self.masses[parents == index]))

    def normalized(self) -> "DyadicMeasure1D":
        indices, masses = _normalize(self.indices, self.masses)
        return DyadicMeasure1D(self.level, indices, masses)

    def mixture(self, other: "DyadicMeasure1D", alpha: float) -> "DyadicMeasure1D":
        """alpha * self + (1 - alpha) * other."""
        _require_same_level(self, other)
        return DyadicMeasure1D.from_arrays(
            self.level,
            np.concatenate([self.indices, other.indices]),
            np.concatenate([alpha * self.masses, (1 - alpha) * other.masses]),
            normalize=False,
        )


def _normalize(indices: np.ndarray, masses: np.ndarray):
    total = float(np.sum(masses))
    if total <= 0:
        raise PreconditionError("empty condition")
    masses = masses / total
    keep = masses >= MASS_FLOOR
    indices, masses = indices[keep], masses[keep]
    return indices, masses / np.sum(masses)


def _require_same_level(first, second):
    if first.level != second.level:
        raise PreconditionError(f"level mismatch: {first.level} != {second.level}")


# ---------------------------------------------------------------------------
# Measures on G
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DyadicMeasureG:
    """Sparse level-n histogram of a measure on G in log-scale coordinates (s, t)."""

    level: int
    k1: np.ndarray
    k2: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        if not 0 <= self.level <= MAX_LEVEL_G:
            raise PreconditionError(f"Level {self.level} outside 0..{MAX_LEVEL_G}")
        k1, k2 = _as_index_array(self.k1), _as_index_array(self.k2)
        masses = _as_mass_array(self.masses)
        if not k1.size == k2.size == masses.size:
            raise ValueError("k1, k2 and masses must have the same length")
        if masses.size == 0:
            raise ValueError("A measure needs at least one cell")
        if np.any(np.diff(_pair_key(k1, k2)) <= 0):
            raise ValueError("Cells must be strictly increasing in (k1, k2) order")
        if np.any(masses <= 0) or not np.all(np.isfinite(masses)):
            raise ValueError("Cell masses must be positive and finite")
        object.__setattr__(self, "k1", _frozen(k1))
        object.__setattr__(self, "k2", _frozen(k2))
        object.__setattr__(self, "masses", _frozen(masses))

    @classmethod
    def from_arrays(cls, level: int, k1, k2, masses, normalize: bool = True) -> "DyadicMeasureG":
        masses = _as_mass_array(masses)
        if np.any(masses < 0):
            raise ValueError("Cell masses must be nonnegative")
        keys, masses = aggregate_cells(_pair_key(k1, k2), masses)
        if normalize:
            keys, masses = _normalize(keys, masses)
        k1, k2 = _unpair_key(keys)
        return cls(level, k1, k2, masses)

    @classmethod
    def from_cells(cls, level: int, cells: Mapping[tuple[int, int], float], normalize: bool = True) -> "DyadicMeasureG":
        pairs = list(cells.keys())
        return cls.from_arrays(
            level, [p[0] for p in pairs], [p[1] for p in pairs], list(cells.values()), normalize
        )

    @classmethod
    def from_points(cls, s, t, level: int, weights=None) -> "DyadicMeasureG":
        s = np.asarray(s, dtype=np.float64).reshape(-1)
        t = np.asarray(t, dtype=np.float64).reshape(-1)
        if weights is None:
            weights = np.full(s.size, 1.0 / max(s.size, 1))
        scale = 2.0**level
        return cls.from_arrays(
            level, np.floor(s * scale).astype(np.int64), np.floor(t * scale).astype(np.int64), weights
        )

    @classmethod
    def dirac(cls, level: int, k1: int = 0, k2: int = 0) -> "DyadicMeasureG":
        return cls(level, np.array([k1]), np.array([k2]), np.array([1.0]))

    @classmethod
    def product_of(cls, s_measure: DyadicMeasure1D, t_measure: DyadicMeasure1D) -> "DyadicMeasureG":
        """The product of a measure on the s axis and one on the t axis."""
        _require_same_level(s_measure, t_measure)
        k1 = np.repeat(s_measure.indices, len(t_measure))
        k2 = np.tile(t_measure.indices, len(s_measure))
        masses = np.outer(s_measure.masses, t_measure.masses).reshape(-1)
        return cls.from_arrays(s_measure.level, k1, k2, masses, normalize=False)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.masses))

    @property
    def cells(self) -> dict[tuple[int, int], float]:
        return {
            (a, b): m for a, b, m in zip(self.k1.tolist(), self.k2.tolist(), self.masses.tolist())
        }

    def __len__(self) -> int:
        return int(self.masses.size)

    def lower_corners(self) -> tuple[np.ndarray, np.ndarray]:
        scale = 2.0**-self.level
        return self.k1 * scale, self.k2 * scale

    def keys(self) -> np.ndarray:
        return _pair_key(self.k1, self.k2)


MeasureType = Union[DyadicMeasure1D, DyadicMeasureG]


def marginal(nu: DyadicMeasureG, axis: Literal["s", "t"]) -> DyadicMeasure1D:
    """Projection of nu onto one coordinate axis of G."""
    indices = nu.k1 if axis == "s" else nu.k2
    return DyadicMeasure1D.from_arrays(nu.level, indices, nu.masses, normalize=False)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ComponentSample:
    """A component measure with the level it is conditioned at and its selection weight."""

    component: MeasureType
    base_level: int
    weight: float
    cell: Union[int, tuple[int, int]]


def condition(mu: DyadicMeasure1D, window: Iterable[int]) -> DyadicMeasure1D:
    """Restriction of mu to the window cells, renormalized."""
    window = _as_index_array(list(window) if not isinstance(window, np.ndarray) else window)
    mask = np.isin(mu.indices, window)
    if not np.any(mask) or float(np.sum(mu.masses[mask])) <= 0:
        raise PreconditionError("empty condition")
    indices, masses = _normalize(mu.indices[mask], mu.masses[mask])
    return DyadicMeasure1D(mu.level, indices, masses)


def coarsen(mu: DyadicMeasure1D, m: int) -> DyadicMeasure1D:
    """Sum masses into the parent cells m levels up."""
    if not 0 <= m <= mu.level:
        raise PreconditionError(f"cannot coarsen level {mu.level} by {m}")
    if m == 0:
        return mu
    indices, masses = aggregate_cells(mu.indices >> m, mu.masses)
    return DyadicMeasure1D(mu.level - m, indices, masses)


def coarsen_to(mu: DyadicMeasure1D, level: int) -> DyadicMeasure1D:
    return coarsen(mu, mu.level - level)


def coarsen_G(nu: DyadicMeasureG, m: int) -> DyadicMeasureG:
    if not 0 <= m <= nu.level:
        raise PreconditionError(f"cannot coarsen level {nu.level} by {m}")
    if m == 0:
        return nu
    return DyadicMeasureG.from_arrays(nu.level - m, nu.k1 >> m, nu.k2 >> m, nu.masses, normalize=False)


def component(mu: DyadicMeasure1D, k: int, i: int) -> DyadicMeasure1D:
    """mu conditioned on the level-i cell k, kept at resolution mu.level."""
    if not 0 <= i <= mu.level:
        raise PreconditionError(f"component level {i} outside 0..{mu.level}")
    mask = (mu.indices >> (mu.level - i)) == k
    if not np.any(mask):
        raise PreconditionError(f"level-{i} cell {k} has zero mass")
    indices, masses = _normalize(mu.indices[mask], mu.masses[mask])
    return DyadicMeasure1D(mu.level, indices, masses)


def component_at(mu: DyadicMeasure1D, x: float, i: int) -> DyadicMeasure1D:
    """The level-i component of mu at the point x."""
    return component(mu, int(math.floor(x * 2.0**i)), i)


def component_G(nu: DyadicMeasureG, cell: tuple[int, int], i: int) -> DyadicMeasureG:
    if not 0 <= i <= nu.level:
        raise PreconditionError(f"component level {i} outside 0..{nu.level}")
    shift = nu.level - i
    mask = ((nu.k1 >> shift) == cell[0]) & ((nu.k2 >> shift) == cell[1])
    if not np.any(mask):
        raise PreconditionError(f"level-{i} cell {cell} has zero mass")
    return DyadicMeasureG.from_arrays(nu.level, nu.k1[mask], nu.k2[mask], nu.masses[mask])


def group_starts(parents: np.ndarray):
    """Start offsets of runs of equal values in a sorted array."""
    return np.concatenate([[0], np.flatnonzero(np.diff(parents)) + 1])


def component_distribution(mu: DyadicMeasure1D, n: int) -> list[ComponentSample]:
    """Enumerate the law of mu_{x,i}: i uniform in 0..n, the cell drawn with probability mu(I)."""
    if not 0 <= n <= mu.level:
        raise PreconditionError(f"component range 0..{n} exceeds resolution {mu.level}")
    samples = []
    for i in range(n + 1):
        parents = mu.indices >> (mu.level - i)
        starts = group_starts(parents)
        group_mass = np.add.reduceat(mu.masses, starts)
        bounds = np.append(starts, parents.size)
        for g, start in enumerate(starts):
            stop = bounds[g + 1]
            masses = mu.masses[start:stop] / group_mass[g]
            samples.append(
                ComponentSample(
                    component=DyadicMeasure1D(mu.level, mu.indices[start:stop], masses),
                    base_level=i,
                    weight=float(group_mass[g]) / (n + 1),
                    cell=int(parents[start]),
                )
            )
    return samples


def component_distribution_G(nu: DyadicMeasureG, n: int) -> list[ComponentSample]:
    if not 0 <= n <= nu.level:
        raise PreconditionError(f"component range 0..{n} exceeds resolution {nu.level}")
    samples = []
    for i in range(n + 1):
        shift = nu.level - i
        parents = _pair_key(nu.k1 >> shift, nu.k2 >> shift)
        order = np.argsort(parents, kind="stable")
        parents = parents[order]
        starts = group_starts(parents)
        bounds = np.append(starts, parents.size)
        for g, start in enumerate(starts):
            rows = order[start : bounds[g + 1]]
            weight = float(np.sum(nu.masses[rows]))
            p1, p2 = _unpair_key(parents[start : start + 1])
            samples.append(
                ComponentSample(
                    component=DyadicMeasureG.from_arrays(nu.level, nu.k1[rows], nu.k2[rows], nu.masses[rows]),
                    base_level=i,
                    weight=weight / (n + 1),
                    cell=(int(p1[0]), int(p2[0])),
                )
            )
    return samples


def pushforward_affine(mu: DyadicMeasure1D, phi: AffineMap, level: int | None = None) -> DyadicMeasure1D:
    """Image of mu under phi, accumulated by mapping cell midpoints.

    The default output level is mu.level - round(log2 |ratio|), so that cells
    keep their size relative to the image.
    """
    target = mu.level - _level_shift(phi.norm) if level is None else level
    if not 0 <= target <= MAX_LEVEL_R:
        raise PreconditionError(f"push-forward level {target} outside 0..{MAX_LEVEL_R}")
    images = phi(mu.midpoints())
    indices = np.floor(images * 2.0**target).astype(np.int64)
    indices, masses = aggregate_cells(indices, mu.masses)
    return DyadicMeasure1D(target, indices, masses)


@dataclass(frozen=True, eq=False)
class ProductMeasure:
    """Sparse histogram on G x R cells: rows (k1, k2, k) with masses."""

    level: int
    k1: np.ndarray
    k2: np.ndarray
    k: np.ndarray
    masses: np.ndarray

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.masses))

    def marginal_G(self) -> DyadicMeasureG:
        return DyadicMeasureG.from_arrays(self.level, self.k1, self.k2, self.masses, normalize=False)

    def marginal_R(self) -> DyadicMeasure1D:
        return DyadicMeasure1D.from_arrays(self.level, self.k, self.masses, normalize=False)


def product(nu: DyadicMeasureG, mu: DyadicMeasure1D) -> ProductMeasure:
    _require_same_level(nu, mu)
    size_nu, size_mu = len(nu), len(mu)
    return ProductMeasure(
        level=mu.level,
        k1=np.repeat(nu.k1, size_mu),
        k2=np.repeat(nu.k2, size_mu),
        k=np.tile(mu.indices, size_nu),
        masses=np.outer(nu.masses, mu.masses).reshape(-1),
    )


def total_variation(mu: DyadicMeasure1D, nu: DyadicMeasure1D) -> float:
    _require_same_level(mu, nu)
    union = np.union1d(mu.indices, nu.indices)
    dense_mu = np.zeros(union.size)
    dense_nu = np.zeros(union.size)
    dense_mu[np.searchsorted(union, mu.indices)] = mu.masses
    dense_nu[np.searchsorted(union, nu.indices)] = nu.masses
    return 0.5 * float(np.sum(np.abs(dense_mu - dense_nu)))


def normalize_support(mu: DyadicMeasure1D) -> tuple[DyadicMeasure1D, int, int]:
    """Apply x -> 2^-N (x + k) with integer k and the smallest N >= 0 placing the support in [0, 1/2).

    Returns the moved measure with N and k. The move is exact: translating by
    an integer shifts indices, scaling by 2^-N raises the level. When that
    level would pass MAX_LEVEL_R the measure is coarsened first, so the result
    sits at MAX_LEVEL_R.
    """
    working = mu
    while True:
        k = -int(math.floor(float(working.indices[0]) / 2.0**working.level))
        offset = k << working.level
        span = int(working.indices[-1]) + 1 + offset
        n_shift = max(0, (span - 1).bit_length() - (working.level - 1))
        excess = working.level + n_shift - MAX_LEVEL_R
        if excess <= 0:
            break
        if excess > working.level:
            raise PreconditionError(f"support too wide to normalize below level {MAX_LEVEL_R}")
        logger.debug(f"Coarsening by {excess} levels before normalizing the support")
        working = coarsen(working, excess)
    moved = DyadicMeasure1D(working.level + n_shift, working.indices + offset, working.masses)
    logger.debug(f"Support normalized with N={n_shift}, k={k}")
    return moved, n_shift, k


def components_of_components_tv(mu: DyadicMeasure1D, n: int, m: int) -> float:
    """Total variation between the component law P_n and the two-stage law Q_{n,m}.

    Q_{n,m} draws a level-i component (i uniform in 0..n), then a level-j
    component of it with j uniform in i..i+m. Both laws live on pairs
    (level j, cell J).
    """
    if n + m > mu.level:
        raise PreconditionError(f"levels up to {n + m} exceed resolution {mu.level}")
    distance = 0.0
    for j in range(n + m + 1):
        cell_masses = coarsen_to(mu, j).masses
        p_weight = 1.0 / (n + 1) if j <= n else 0.0
        q_weight = sum(
            1.0 / ((n + 1) * (m + 1)) for i in range(max(0, j - m), min(n, j) + 1)
        )
        distance += float(np.sum(np.abs(p_weight - q_weight) * cell_masses))
    return 0.5 * distance


# ---------------------------------------------------------------------------
# JSON interchange
# ---------------------------------------------------------------------------


class MeasureDocument(BaseModel):
    """JSON layout of a measure on R or on G."""

    space: Literal["R", "G"] = Field(..., description="R for the line, G for the similarity group.")
    level: int = Field(..., ge=0, description="Dyadic level of the cells.")
    cells: list[list[float]] = Field(
        ..., description="Rows [k, mass] on R or [k1, k2, mass] on G."
    )


def measure_to_document(measure: MeasureType) -> MeasureDocument:
    if isinstance(measure, DyadicMeasureG):
        rows = [[int(a), int(b), float(m)] for a, b, m in zip(measure.k1, measure.k2, measure.masses)]
        return MeasureDocument(space="G", level=measure.level, cells=rows)
    rows = [[int(k), float(m)] for k, m in zip(measure.indices, measure.masses)]
    return MeasureDocument(space="R", level=measure.level, cells=rows)


def measure_from_document(document: MeasureDocument) -> MeasureType:
    if document.space == "G":
        if any(len(row) != 3 for row in document.cells):
            raise ValueError("G cells must be [k1, k2, mass]")
        return DyadicMeasureG.from_arrays(
            document.level,
            [int(row[0]) for row in document.cells],
            [int(row[1]) for row in document.cells],
            [row[2] for row in document.cells],
        )
    if any(len(row) != 2 for row in document.cells):
        raise ValueError("R cells must be [k, mass]")
    return DyadicMeasure1D.from_arrays(
        document.level, [int(row[0]) for row in document.cells], [row[1] for row in document.cells]
    )


def save_measure(measure: MeasureType, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # json.dumps writes floats with repr, i.e. 17 significant digits
    path.write_text(json.dumps(measure_to_document(measure).model_dump()), encoding="utf-8")
    return path


def load_measure(path: Union[str, Path]) -> MeasureType:
    text = Path(path).read_text(encoding="utf-8")
    return measure_from_document(MeasureDocument.model_validate_json(text))

