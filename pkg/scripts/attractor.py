"""Attractors of contracting families at dyadic resolution.

Covers attractor cell sets, box dimension and porosity estimates, the
similarity dimension, and unions of scaled Cantor copies centered on a set.
"""

from __future__ import annotations

import functools
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, NamedTuple, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from convolution import DIRECT_PAIR_LIMIT, fft_convolve
from measure_core import MAX_LEVEL_R, AffineMap, PreconditionError, group_starts

logger = logging.getLogger(__name__)

DEFAULT_GRID_EXPONENT = 8
MAP_CHUNK_ELEMENTS = 1 << 22
DEFAULT_C_GRID = tuple(np.round(np.arange(0.5, 0.049, -0.05), 2).tolist()) + (0.025, 0.01)


@dataclass(frozen=True, eq=False)
class CellSet:
    """Sorted, unique level-n cell indices covering a set."""

    level: int
    cells: np.ndarray

    def __post_init__(self):
        if not 0 <= self.level <= MAX_LEVEL_R:
            raise PreconditionError(f"Level {self.level} outside 0..{MAX_LEVEL_R}")
        cells = np.unique(np.asarray(self.cells, dtype=np.int64))
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    def __len__(self) -> int:
        return int(self.cells.size)

    def __eq__(self, other) -> bool:
        return isinstance(other, CellSet) and self.level == other.level and np.array_equal(self.cells, other.cells)

    def __hash__(self):
        return hash((self.level, self.cells.tobytes()))

    def issubset(self, other: "CellSet") -> bool:
        if self.level != other.level:
            raise PreconditionError("cell sets live at different levels")
        return bool(np.all(np.isin(self.cells, other.cells)))

    def dilate(self, radius: int = 1) -> "CellSet":
        offsets = np.arange(-radius, radius + 1)
        return CellSet(self.level, np.add.outer(self.cells, offsets).reshape(-1))

    def midpoints(self) -> np.ndarray:
        return (self.cells + 0.5) / 2.0**self.level

    def runs(self) -> tuple[np.ndarray, np.ndarray]:
        """Maximal runs of consecutive cells as (start, stop) index arrays, stop exclusive."""
        if self.cells.size == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        breaks = np.flatnonzero(np.diff(self.cells) != 1) + 1
        starts = self.cells[np.concatenate([[0], breaks])]
        stops = self.cells[np.concatenate([breaks - 1, [self.cells.size - 1]])] + 1
        return starts, stops


class CellSetDocument(BaseModel):
    level: int = Field(..., ge=0, description="Dyadic level of the cells.")
    cells: list[int] = Field(..., description="Sorted cell indices k of [k/2^n, (k+1)/2^n).")


def save_cells(cell_set: CellSet, path: Union[str, Path]) -> Path:
    path = Path(path)
    document = CellSetDocument(level=cell_set.level, cells=cell_set.cells.tolist())
    path.write_text(document.model_dump_json(indent=2), encoding="utf-8")
    return path


def load_cells(path: Union[str, Path]) -> CellSet:
    document = CellSetDocument.model_validate(json.loads(Path(path).read_text(encoding="utf-8")))
    return CellSet(document.level, np.array(document.cells, dtype=np.int64))


@dataclass(frozen=True)
class FamilySpec:
    """A finite family of contractions, possibly a grid surrogate of a compact box."""

    maps: tuple[AffineMap, ...]
    grid_exponent: Optional[int] = None

    def __post_init__(self):
        if not self.maps:
            raise ValueError("empty family")
        for phi in self.maps:
            if not 0 < phi.norm < 1:
                raise ValueError(f"non-contracting map {phi}")

    @classmethod
    def finite(cls, maps: Sequence[AffineMap]) -> "FamilySpec":
        return cls(tuple(maps))

    @classmethod
    def box(
        cls,
        ratio_range: tuple[float, float],
        t_range: tuple[float, float],
        grid_exponent: int = DEFAULT_GRID_EXPONENT,
    ) -> "FamilySpec":
        """All maps x -> a x + t with (a, t) on the 2^-g grid of the box."""
        r0, r1 = ratio_range
        if not 0 < r0 <= r1 < 1:
            raise ValueError(f"ratio range must lie in (0, 1): {ratio_range}")
        step = 2.0**-grid_exponent
        ratios = np.append(np.arange(r0, r1, step), r1)
        translations = np.append(np.arange(t_range[0], t_range[1], step), t_range[1])
        maps = tuple(AffineMap(float(a), float(t)) for a in np.unique(ratios) for t in np.unique(translations))
        logger.info(f"Box family discretized into {len(maps)} maps (grid 2^-{grid_exponent})")
        return cls(maps, grid_exponent)

    @property
    def r1(self) -> float:
        return max(phi.norm for phi in self.maps)

    @property
    def ratios(self) -> np.ndarray:
        return np.array([phi.ratio for phi in self.maps])

    @property
    def translations(self) -> np.ndarray:
        return np.array([phi.translation for phi in self.maps])


def attractor_hull(family: FamilySpec) -> tuple[float, float]:
    """Convex hull [a, b] of the attractor."""
    ratios, translations = family.ratios, family.translations
    if np.all(ratios > 0):
        fixed = translations / (1 - ratios)
        return float(fixed.min()), float(fixed.max())
    bound = float(np.max(np.abs(translations))) / (1 - family.r1)
    low, high = -bound, bound
    for _ in range(4000):
        images = np.concatenate([ratios * low + translations, ratios * high + translations])
        new_low, new_high = float(images.min()), float(images.max())
        if abs(new_low - low) < 1e-15 and abs(new_high - high) < 1e-15:
            break
        low, high = new_low, new_high
    return low, high


def _snapped(value: float) -> float:
    nearest = round(value)
    return float(nearest) if abs(value - nearest) < 1e-9 else value


def _snapped_array(values: np.ndarray) -> np.ndarray:
    nearest = np.round(values)
    return np.where(np.abs(values - nearest) < 1e-9, nearest, values)


def hutchinson_step(family: FamilySpec, cell_set: CellSet) -> CellSet:
    """Cells met by the union of the images of the cell runs of Y under every map."""
    n = cell_set.level
    scale = 2.0**n
    starts, stops = cell_set.runs()
    run_low, run_high = starts / scale, stops / scale
    ratios, translations = family.ratios, family.translations
    chunk = max(1, MAP_CHUNK_ELEMENTS // max(starts.size, 1))
    first_cells, last_cells = [], []
    for begin in range(0, ratios.size, chunk):
        a = ratios[begin : begin + chunk, None]
        t = translations[begin : begin + chunk, None]
        ends = np.stack([a * run_low + t, a * run_high + t])
        low = np.floor(_snapped_array(ends.min(axis=0) * scale)).astype(np.int64)
        high = np.ceil(_snapped_array(ends.max(axis=0) * scale)).astype(np.int64)
        first_cells.append(low.reshape(-1))
        last_cells.append(np.maximum(high, low + 1).reshape(-1))
    return _cover(n, np.concatenate(first_cells), np.concatenate(last_cells))


def _cover(level: int, starts: np.ndarray, stops: np.ndarray) -> CellSet:
    base = int(starts.min())
    diff = np.zeros(int(stops.max()) - base + 1, dtype=np.int64)
    np.add.at(diff, starts - base, 1)
    np.add.at(diff, stops - base, -1)
    return CellSet(level, np.flatnonzero(np.cumsum(diff)[:-1] > 0) + base)


def attractor_cells(family: FamilySpec, n: int, max_steps: Optional[int] = None) -> CellSet:
    """Level-n cells of the attractor X = U phi(X).

    Starts from the cells of the convex hull and iterates Y <- Y n T(Y) until
    the set stops changing.
    """
    if not 0 <= n <= MAX_LEVEL_R:
        raise PreconditionError(f"Level {n} outside 0..{MAX_LEVEL_R}")
    low, high = attractor_hull(family)
    first = int(math.floor(_snapped(low * 2.0**n)))
    last = max(int(math.ceil(_snapped(high * 2.0**n))), first + 1)
    cells = CellSet(n, np.arange(first, last, dtype=np.int64))
    max_steps = 20 * (n + 8) if max_steps is None else max_steps
    for step in range(1, max_steps + 1):
        image = hutchinson_step(family, cells)
        shrunk = CellSet(n, np.intersect1d(cells.cells, image.cells, assume_unique=True))
        if shrunk == cells:
            break
        cells = shrunk
    else:
        logger.warning(f"⚠️  Attractor iteration hit the cap of {max_steps} steps at level {n}")
    logger.debug(f"Attractor at level {n}: {len(cells)} cells after {step} steps")
    return cells


def dimension_table(cellsets: Sequence[CellSet]) -> pd.DataFrame:
    levels = [cell_set.level for cell_set in cellsets]
    counts = [len(cell_set) for cell_set in cellsets]
    return pd.DataFrame({"level": levels, "count": counts, "log2count": np.log2(counts)})


def box_dim_estimate(cellsets: Sequence[CellSet]) -> float:
    """Least-squares slope of log2 |cells| against the level."""
    if len(cellsets) < 4:
        raise PreconditionError("box dimension needs at least four levels")
    table = dimension_table(cellsets)
    if table["count"].nunique() == 1:
        return 0.0
    return float(np.polyfit(table["level"], table["log2count"], 1)[0])


def similarity_dimension(maps: Sequence[Union[AffineMap, float]]) -> float:
    """The root s of sum ||phi||^s = 1."""
    if not maps:
        raise ValueError("empty family")
    norms = np.array([phi.norm if isinstance(phi, AffineMap) else abs(float(phi)) for phi in maps])
    if np.any(norms <= 0) or np.any(norms >= 1):
        raise ValueError("similarity dimension needs ratios in (0, 1)")
    if np.all(norms == norms[0]):
        return math.log(norms.size) / math.log(1 / norms[0])
    low, high = 0.0, 64.0
    while high - low > 1e-15 * max(1.0, high):
        mid = 0.5 * (low + high)
        if np.sum(norms**mid) > 1:
            low = mid
        else:
            high = mid
    return 0.5 * (low + high)


def _window_gap_ratios(cells: np.ndarray, level: int) -> list[float]:
    """For each window level j < level, the smallest (longest gap / window length) over occupied windows.

    A gap is a run of empty cells plus the partially empty occupied cell at each end.
    """
    ratios = []
    for j in range(level):
        width = 1 << (level - j)
        parents = cells >> (level - j)
        starts = group_starts(parents)
        stops = np.append(starts[1:], cells.size)
        inner = np.diff(cells) - 1
        same_window = np.diff(parents) == 0
        inner = np.where(same_window & (inner > 0), inner + 2, 0)
        longest = np.zeros(starts.size, dtype=np.int64)
        if inner.size:
            padded = np.append(inner, 0)
            longest = np.maximum.reduceat(padded, starts)
        leading = cells[starts] - parents[starts] * width
        trailing = (parents[starts] + 1) * width - 1 - cells[stops - 1]
        leading = np.where(leading > 0, leading + 1, 0)
        trailing = np.where(trailing > 0, trailing + 1, 0)
        best = np.maximum(longest, np.maximum(leading, trailing))
        ratios.append(float(best.min()) / width)
    return ratios


def porosity_constant(
    cellsets: Union[CellSet, Sequence[CellSet]], c_grid: Sequence[float] = DEFAULT_C_GRID
) -> float:
    """Largest c on the grid such that every occupied dyadic window I at a level
    j <= n_max - ceil(log2(1/c)) - 1 contains a gap of length >= c|I|.

    Returns 0.0 when no grid value passes. Only dyadic windows are scanned.
    """
    finest = cellsets if isinstance(cellsets, CellSet) else max(cellsets, key=lambda cell_set: cell_set.level)
    if len(finest) == 0:
        raise PreconditionError("porosity of an empty set")
    ratios = _window_gap_ratios(finest.cells, finest.level)
    for c in sorted(c_grid, reverse=True):
        top = finest.level - math.ceil(math.log2(1 / c)) - 1
        if top < 0:
            continue
        if min(ratios[: top + 1]) >= c:
            logger.info(f"Porosity constant {c} at level {finest.level} (dyadic windows only)")
            return float(c)
    return 0.0


class PorousBound(NamedTuple):
    m: int
    entropy_bound: float


def porous_entropy_bound(c: float) -> PorousBound:
    """Smallest m with 2^-m < c/2 and the component entropy bound log2(2^m - 1)/m."""
    if not 0 < c < 1:
        raise ValueError(f"porosity constant must lie in (0, 1): {c}")
    m = 1
    while 2.0**-m >= c / 2:
        m += 1
    return PorousBound(m, math.log2(2**m - 1) / m)


@functools.lru_cache(maxsize=8)
def cantor_endpoints(depth: int) -> np.ndarray:
    """Left endpoints of the 2^depth construction intervals of the middle-third Cantor set."""
    endpoints = np.zeros(1)
    for k in range(1, depth + 1):
        endpoints = np.concatenate([endpoints, endpoints + 2.0 / 3.0**k])
    endpoints.sort()
    endpoints.setflags(write=False)
    return endpoints


def _scaled_cantor_cells(ratio: float, level: int) -> np.ndarray:
    """Cells of ratio * (K - 1/2) shifted by half a level-n cell."""
    depth = math.ceil((level + 2) / math.log2(3))
    endpoints = cantor_endpoints(depth)
    scale = 2.0**level
    low = (ratio * (endpoints - 0.5) + 0.5 / scale) * scale
    high = low + ratio * 3.0**-depth * scale
    first = np.floor(low).astype(np.int64)
    last = np.floor(high).astype(np.int64)
    return np.unique(np.concatenate([first, last]))


def _minkowski_sum(first: np.ndarray, second: np.ndarray) -> np.ndarray:
    if first.size * second.size <= DIRECT_PAIR_LIMIT:
        return np.unique(np.add.outer(first, second).reshape(-1))
    a_base, b_base = int(first.min()), int(second.min())
    a = np.zeros(int(first.max()) - a_base + 1)
    b = np.zeros(int(second.max()) - b_base + 1)
    a[first - a_base] = 1.0
    b[second - b_base] = 1.0
    return np.flatnonzero(fft_convolve(a, b) > 0.5) + a_base + b_base


RatioRule = Union[float, Callable[[np.ndarray], np.ndarray]]


def cantor_copies_union(centers: CellSet, ratio_rule: RatioRule = 1.0) -> CellSet:
    """Cells of Y = U_{c in C} (r(c) K + c), K the symmetric middle-third Cantor set.

    Centers are the cell midpoints of C. `ratio_rule` is a constant or a
    vectorized function of the center.
    """
    if len(centers) == 0:
        raise PreconditionError("no centers")
    level = centers.level
    if callable(ratio_rule):
        ratios = np.asarray(ratio_rule(centers.midpoints()), dtype=np.float64)
    else:
        ratios = np.full(len(centers), float(ratio_rule))
    if np.any(ratios <= 0) or np.any(ratios > 1):
        raise PreconditionError("copy ratios must lie in (0, 1]")
    pieces = []
    for ratio in np.unique(ratios):
        group = centers.cells[ratios == ratio]
        pieces.append(_minkowski_sum(group, _scaled_cantor_cells(float(ratio), level)))
    return CellSet(level, np.concatenate(pieces))


def sinusoidal_ratio_rule(low: float, high: float, seed: int = 0, terms: int = 3) -> Callable[[np.ndarray], np.ndarray]:
    """A smooth pseudo-random rule c -> r(c) with values in [low, high]."""
    rng = np.random.default_rng(seed)
    frequencies = rng.integers(1, 17, size=terms)
    phases = rng.random(terms)

    def rule(points: np.ndarray) -> np.ndarray:
        waves = np.sin(2 * np.pi * (np.multiply.outer(points, frequencies) + phases))
        mean = waves.mean(axis=-1)
        return low + (high - low) * (mean + 1) / 2

    return rule
