"""Shannon entropy of dyadic histograms and the multiscale estimators built on it.

All logarithms are base 2. Component statistics are computed by exact
enumeration: the level-i components of a measure are its restrictions to the
level-i cells that carry mass, and a component's scale-m entropy only needs
the histogram m levels further down.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, NamedTuple, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, model_validator

from measure_core import (
    NORMALIZATION_TOLERANCE,
    DyadicMeasure1D,
    DyadicMeasureG,
    PreconditionError,
    coarsen_G,
    coarsen_to,
    group_starts,
    marginal,
)

logger = logging.getLogger(__name__)


class EntropyReport(BaseModel):
    """Entropy of a measure with respect to a dyadic partition, in bits."""

    value_bits: float = Field(..., ge=0, description="Entropy in bits.")
    level: int = Field(..., ge=0, description="Level of the partition.")
    conditioning_level: Optional[int] = Field(
        None, description="Level of the coarser partition conditioned on, if any."
    )


class PorosityVerdict(BaseModel):
    """Outcome of an (h, delta, m)-entropy porosity test over a range of scales."""

    h: float
    delta: float
    m: int = Field(..., ge=1)
    scale_range: tuple[int, int]
    probability: float = Field(..., ge=0, le=1, description="Probability of the low-entropy event.")
    passes: bool

    @model_validator(mode="after")
    def _passes_matches_probability(self):
        if self.passes != (self.probability > 1 - self.delta):
            raise ValueError("passes must equal probability > 1 - delta")
        return self


class MultiscaleCheck(NamedTuple):
    lhs: float
    rhs: float
    gap: float


class EntropyDimensionEstimate(BaseModel):
    """Scale-n entropies of a measure with a least-squares slope and tail extremes."""

    slope: float
    lower: float = Field(..., description="Smallest H/n over the tail levels.")
    upper: float = Field(..., description="Largest H/n over the tail levels.")
    levels: list[int]
    entropies: list[float]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({"n": self.levels, "H_bits": self.entropies})
        frame["H_over_n"] = frame["H_bits"] / frame["n"]
        return frame


class ComponentPorosity(BaseModel):
    """How often components of a porous measure are themselves porous."""

    probability_porous: float = Field(..., ge=0, le=1)
    failing_fraction: float = Field(..., ge=0, le=1)
    bound: float = Field(..., description="delta + 4k/n.")
    within_bound: bool


class PointwisePorosity(BaseModel):
    """Entropy porosity of the components at a point along n_i = [i^(1+tau)]."""

    levels: list[int]
    probabilities: list[float]
    fraction_passing: float = Field(..., ge=0, le=1)
    passes: bool


def entropy_of_masses(masses: np.ndarray) -> float:
    """-sum p log2 p of a probability vector with positive entries."""
    masses = np.asarray(masses, dtype=np.float64)
    value = float(-np.sum(masses * np.log2(masses)))
    return max(value, 0.0)


def _check_normalized(total: float):
    if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
        raise PreconditionError(f"measure is not normalized (total mass {total!r})")


def _check_level(level: int, resolution: int):
    if not 0 <= level <= resolution:
        raise PreconditionError(f"level {level} exceeds resolution {resolution}")


def grouped_entropies(parents: np.ndarray, masses: np.ndarray):
    """Entropy of each run of equal parents after normalizing within the run.

    Returns the parent of every run, the run's total mass and its entropy.
    """
    starts = group_starts(parents)
    totals = np.add.reduceat(masses, starts)
    lengths = np.diff(np.append(starts, masses.size))
    shares = masses / np.repeat(totals, lengths)
    entropies = np.add.reduceat(-shares * np.log2(shares), starts)
    return parents[starts], totals, np.maximum(entropies, 0.0)


def entropy(mu: DyadicMeasure1D, m: Optional[int] = None) -> EntropyReport:
    m = mu.level if m is None else m
    _check_level(m, mu.level)
    _check_normalized(mu.total_mass)
    return EntropyReport(value_bits=entropy_of_masses(coarsen_to(mu, m).masses), level=m)


def entropy_G(nu: DyadicMeasureG, m: Optional[int] = None) -> EntropyReport:
    m = nu.level if m is None else m
    _check_level(m, nu.level)
    _check_normalized(nu.total_mass)
    return EntropyReport(value_bits=entropy_of_masses(coarsen_G(nu, nu.level - m).masses), level=m)


def conditional_entropy(mu: DyadicMeasure1D, m: int, n: int) -> EntropyReport:
    """H(mu, D_m | D_n) as the mu-average of the entropies of the level-n restrictions."""
    if n > m:
        raise PreconditionError(f"coarse level {n} is finer than {m}")
    _check_level(m, mu.level)
    _check_normalized(mu.total_mass)
    fine = coarsen_to(mu, m)
    _, totals, entropies = grouped_entropies(fine.indices >> (m - n), fine.masses)
    return EntropyReport(value_bits=max(float(np.sum(totals * entropies)), 0.0), level=m, conditioning_level=n)


def axis_entropy(nu: DyadicMeasureG, axis: str, m: Optional[int] = None) -> EntropyReport:
    """Entropy of nu with respect to the partition by one coordinate of G."""
    m = nu.level if m is None else m
    return entropy(marginal(nu, axis), m)


def axis_conditional_entropy(nu: DyadicMeasureG, m: int, given_axis: str) -> EntropyReport:
    """H(nu, E | F) where F partitions by `given_axis` and E by the other axis, both at level m."""
    _check_level(m, nu.level)
    coarse = coarsen_G(nu, nu.level - m)
    given, other = (coarse.k1, coarse.k2) if given_axis == "s" else (coarse.k2, coarse.k1)
    order = np.lexsort((other, given))
    _, totals, entropies = grouped_entropies(given[order], coarse.masses[order])
    return EntropyReport(value_bits=max(float(np.sum(totals * entropies)), 0.0), level=m, conditioning_level=m)


def component_entropies(mu: DyadicMeasure1D, i: int, m: int):
    """H(mu_I, D_{i+m}) for every level-i cell I with mass.

    Returns (cells, masses, entropies).
    """
    _check_level(i + m, mu.level)
    fine = coarsen_to(mu, i + m)
    return grouped_entropies(fine.indices >> m, fine.masses)


def _map_levels(func: Callable[[int], float], levels: Iterable[int], workers: int = 1) -> np.ndarray:
    """Evaluate func per level; results come back in level order."""
    levels = list(levels)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return np.array(list(pool.map(func, levels)), dtype=np.float64)
    return np.array([func(level) for level in levels], dtype=np.float64)


def multiscale_check(mu: DyadicMeasure1D, m: int, n: int, workers: int = 1) -> MultiscaleCheck:
    """Compare (1/n)H(mu, D_n) with the average scale-m entropy of components at levels 1..n."""
    if not 1 <= m < n:
        raise PreconditionError(f"need 1 <= m < n, got m={m}, n={n}")
    if n + m > mu.level:
        raise PreconditionError(f"components at level {n} need resolution {n + m}, have {mu.level}")
    lhs = entropy(mu, n).value_bits / n

    def average_at(i: int) -> float:
        _, masses, entropies = component_entropies(mu, i, m)
        return float(np.sum(masses * entropies)) / m

    rhs = float(np.sum(_map_levels(average_at, range(1, n + 1), workers))) / n
    logger.debug(f"Multiscale check m={m} n={n}: lhs={lhs:.6f} rhs={rhs:.6f}")
    return MultiscaleCheck(lhs, rhs, lhs - rhs)


def entropy_porosity_test(
    mu: DyadicMeasure1D, h: float, delta: float, m: int, n1: int, n2: int, workers: int = 1
) -> PorosityVerdict:
    """Probability over i in n1..n2 and mu-random level-i cells that (1/m)H(mu_{x,i}, D_{i+m}) <= h + delta."""
    if not 0 <= n1 <= n2:
        raise PreconditionError(f"invalid scale range {n1}..{n2}")
    if n2 + m > mu.level:
        raise PreconditionError(f"scale {n2}+{m} exceeds resolution {mu.level}")
    threshold = h + delta + 1e-12

    def low_entropy_mass(i: int) -> float:
        _, masses, entropies = component_entropies(mu, i, m)
        return float(np.sum(masses[entropies / m <= threshold]))

    probability = float(np.mean(_map_levels(low_entropy_mass, range(n1, n2 + 1), workers)))
    probability = min(max(probability, 0.0), 1.0)
    return PorosityVerdict(
        h=h, delta=delta, m=m, scale_range=(n1, n2), probability=probability, passes=probability > 1 - delta
    )


def max_component_entropy(mu: DyadicMeasure1D, m: int, n: int) -> float:
    """Largest (1/m)H(mu_{x,i}, D_{i+m}) over all components with 0 <= i <= n."""
    return max(float(np.max(component_entropies(mu, i, m)[2])) / m for i in range(n + 1))


def porosity_passes_to_components(
    mu: DyadicMeasure1D, h: float, delta: float, m: int, n: int, k: int
) -> ComponentPorosity:
    """Probability that a random component mu_{x,i}, 0 <= i <= n, is (h, delta, m)-porous on i..i+k."""
    if n + k + m > mu.level:
        raise PreconditionError(f"scale {n + k + m} exceeds resolution {mu.level}")
    threshold = h + delta + 1e-12
    low_cells = {}
    for j in range(n + k + 1):
        cells, masses, entropies = component_entropies(mu, j, m)
        low_cells[j] = (cells, np.where(entropies / m <= threshold, masses, 0.0))

    porous_mass = []
    for i in range(n + 1):
        parents, parent_masses, _ = component_entropies(mu, i, 0)
        share = np.zeros(parents.size)
        for j in range(i, i + k + 1):
            cells, low_mass = low_cells[j]
            owners = np.searchsorted(parents, cells >> (j - i))
            share += np.bincount(owners, weights=low_mass, minlength=parents.size)
        share /= (k + 1) * parent_masses
        porous_mass.append(float(np.sum(parent_masses[share > 1 - delta])))

    probability = min(max(float(np.mean(porous_mass)), 0.0), 1.0)
    bound = delta + 4.0 * k / n
    return ComponentPorosity(
        probability_porous=probability,
        failing_fraction=1 - probability,
        bound=bound,
        within_bound=(1 - probability) < bound,
    )


MeasureSource = Union[DyadicMeasure1D, Callable[[int], DyadicMeasure1D]]


def entropy_dim_estimate(
    source: MeasureSource, n_max: int, fit_start: Optional[int] = None
) -> EntropyDimensionEstimate:
    """Least-squares slope of H(mu, D_n) against n.

    `source` is either a measure resolved to at least n_max, or a callable
    returning the measure at a requested level. The fit uses levels fit_start..n_max
    (default: from n_max/4).
    """
    if n_max < 2:
        raise PreconditionError("need at least two levels")
    levels = list(range(1, n_max + 1))
    if isinstance(source, DyadicMeasure1D):
        _check_level(n_max, source.level)
        entropies = [entropy(source, n).value_bits for n in levels]
    else:
        entropies = [entropy(source(n), n).value_bits for n in levels]

    fit_start = max(1, math.ceil(n_max / 4)) if fit_start is None else fit_start
    fit = [(n, value) for n, value in zip(levels, entropies) if n >= fit_start]
    slope = float(np.polyfit([n for n, _ in fit], [value for _, value in fit], 1)[0])

    tail = max(1, math.ceil(n_max / 4))
    tail_ratios = [value / n for n, value in zip(levels[-tail:], entropies[-tail:])]
    logger.info(f"Entropy dimension slope {slope:.4f} over levels {fit_start}..{n_max}")
    return EntropyDimensionEstimate(
        slope=slope, lower=min(tail_ratios), upper=max(tail_ratios), levels=levels, entropies=entropies
    )


def local_dimension(mu: DyadicMeasure1D, x: float, n: int) -> float:
    """-log2 mu(D_n(x)) / n."""
    _check_level(n, mu.level)
    if n == 0:
        raise PreconditionError("local dimension needs n >= 1")
    mass = mu.mass_of_cell(int(math.floor(x * 2.0**n)), n)
    if mass <= 0:
        raise PreconditionError(f"zero-mass cell at x={x}, level {n}")
    return -math.log2(mass) / n


def local_entropy_levels(tau: float, count: int) -> list[int]:
    """n_i = [i^(1+tau)] for i = 0..count."""
    return [int(math.floor(i ** (1 + tau))) for i in range(count + 1)]


def _component_cell_masses(mu: DyadicMeasure1D, x: float, start: int, stop: int) -> np.ndarray:
    """Masses of the level-stop cells inside the level-start cell of x, normalized."""
    coarse = coarsen_to(mu, stop)
    inside = (coarse.indices >> (stop - start)) == int(math.floor(x * 2.0**start))
    masses = coarse.masses[inside]
    if masses.size == 0:
        raise PreconditionError(f"zero-mass cell at x={x}, level {start}")
    return masses / np.sum(masses)


def pointwise_dim_estimate(mu: DyadicMeasure1D, x: float, tau: float, count: int) -> float:
    """Local-entropy-average lower estimate of the pointwise dimension at x, clamped at 0."""
    levels = local_entropy_levels(tau, count)
    _check_level(levels[-1], mu.level)
    terms = []
    for start, stop in zip(levels[:-1], levels[1:]):
        if stop == start:
            continue
        terms.append(entropy_of_masses(_component_cell_masses(mu, x, start, stop)) / (stop - start))
    return max(float(np.sum(terms)) / count - tau, 0.0)


def pointwise_porosity(
    mu: DyadicMeasure1D, x: float, h: float, delta: float, m: int, tau: float, count: int
) -> PointwisePorosity:
    """Test whether mu_{x,n_i} is (h, delta, m)-entropy porous from scale n_i to n_{i+1}."""
    levels = local_entropy_levels(tau, count)
    if levels[-1] + m > mu.level:
        raise PreconditionError(f"scale {levels[-1] + m} exceeds resolution {mu.level}")
    threshold = h + delta + 1e-12
    probabilities = []
    for start, stop in zip(levels[:-1], levels[1:]):
        cell = int(math.floor(x * 2.0**start))
        low = 0.0
        for j in range(start, stop + 1):
            cells, masses, entropies = component_entropies(mu, j, m)
            inside = (cells >> (j - start)) == cell
            total = float(np.sum(masses[inside]))
            if total <= 0:
                raise PreconditionError(f"zero-mass cell at x={x}, level {start}")
            low += float(np.sum(masses[inside & (entropies / m <= threshold)])) / total
        probabilities.append(low / (stop - start + 1))
    passing = [p > 1 - delta for p in probabilities]
    fraction = float(np.mean(passing))
    return PointwisePorosity(
        levels=levels, probabilities=probabilities, fraction_passing=fraction, passes=fraction > 1 - delta
    )


def sweep_table(mu: DyadicMeasure1D, levels: Sequence[int]) -> pd.DataFrame:
    """Rows n, H_bits, H_over_n for the requested levels."""
    rows = []
    for n in levels:
        value = entropy(mu, n).value_bits
        rows.append({"n": n, "H_bits": value, "H_over_n": value / n if n else 0.0})
    return pd.DataFrame(rows, columns=["n", "H_bits", "H_over_n"])
