"""Self-similar and stationary measures of contracting similarities.

Random compositions are stopped at the first time tau_n when the composed
contraction drops below 2^-n, so every stopped map has contraction in
[2^-n r0, 2^-n). Monte-Carlo draws are split into fixed-size chunks and chunk c
always uses the c-th child of the master seed sequence, which keeps results
bit-identical for any worker count.
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Annotated, Callable, Literal, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, model_validator

from dyadic_entropy import (
    PorosityVerdict,
    component_entropies,
    entropy,
    entropy_dim_estimate,
)
from measure_core import (
    AffineMap,
    DyadicMeasure1D,
    PreconditionError,
    aggregate_cells,
    coarsen,
    normalize_support,
    pushforward_affine,
    total_variation,
)

logger = logging.getLogger(__name__)

SEED_POINT = 0.5
EXTRA_LEVELS = 4
CHUNK_SIZE = 1 << 16
CONVERGENCE_TOLERANCE = 1e-10


@dataclass(frozen=True)
class WeightedIFS:
    """Finitely many contracting similarities with selection probabilities."""

    maps: tuple[AffineMap, ...]
    probabilities: tuple[float, ...]

    def __post_init__(self):
        if not self.maps:
            raise ValueError("an IFS needs at least one map")
        if len(self.maps) != len(self.probabilities):
            raise ValueError("one probability per map is required")
        if any(p < 0 for p in self.probabilities) or abs(sum(self.probabilities) - 1) > 1e-9:
            raise ValueError(f"probabilities must form a simplex vector: {self.probabilities}")
        for phi in self.maps:
            if not 0 < phi.norm < 1:
                raise ValueError(f"non-contracting map {phi}")

    @classmethod
    def uniform(cls, maps: Sequence[AffineMap]) -> "WeightedIFS":
        return cls(tuple(maps), tuple([1.0 / len(maps)] * len(maps)))

    @property
    def r0(self) -> float:
        return min(phi.norm for phi in self.maps)

    @property
    def r1(self) -> float:
        return max(phi.norm for phi in self.maps)

    @property
    def ratios(self) -> np.ndarray:
        return np.array([phi.ratio for phi in self.maps])

    @property
    def translations(self) -> np.ndarray:
        return np.array([phi.translation for phi in self.maps])


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------


class MapSampler(ABC):
    """A law on contracting similarities with declared support bounds."""

    r0: float
    r1: float
    t_range: tuple[float, float]

    @abstractmethod
    def draw_many(self, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
        """Ratios and translations of `size` independent maps."""

    def draw(self, rng: np.random.Generator) -> AffineMap:
        ratios, translations = self.draw_many(rng, 1)
        return AffineMap(float(ratios[0]), float(translations[0]))

    def check(self, ratios: np.ndarray, translations: np.ndarray):
        norms = np.abs(ratios)
        if np.any(norms < self.r0 - 1e-15) or np.any(norms > self.r1 + 1e-15):
            raise PreconditionError("sampler drew a ratio outside its declared bounds")
        low, high = self.t_range
        if np.any(translations < low - 1e-15) or np.any(translations > high + 1e-15):
            raise PreconditionError("sampler drew a translation outside its declared bounds")


class FiniteSampler(MapSampler):
    def __init__(self, ifs: WeightedIFS):
        self.ifs = ifs
        self.r0, self.r1 = ifs.r0, ifs.r1
        self.t_range = (float(ifs.translations.min()), float(ifs.translations.max()))
        self._cumulative = np.cumsum(ifs.probabilities)

    def draw_many(self, rng, size):
        picks = np.searchsorted(self._cumulative, rng.random(size), side="right")
        picks = np.minimum(picks, len(self.ifs.maps) - 1)
        return self.ifs.ratios[picks], self.ifs.translations[picks]


class BoxSampler(MapSampler):
    """Ratio uniform in [r0, r1], translation uniform in t_range."""

    def __init__(self, ratio_range: tuple[float, float], t_range: tuple[float, float]):
        self.r0, self.r1 = ratio_range
        self.t_range = t_range

    def draw_many(self, rng, size):
        ratios = rng.uniform(self.r0, self.r1, size)
        return ratios, rng.uniform(self.t_range[0], self.t_range[1], size)


class EndpointSampler(MapSampler):
    """Ratio uniform in [r0, r1], translation 0 or 1 - ratio with equal odds."""

    def __init__(self, ratio_range: tuple[float, float]):
        self.r0, self.r1 = ratio_range
        self.t_range = (0.0, 1.0 - self.r0)

    def draw_many(self, rng, size):
        ratios = rng.uniform(self.r0, self.r1, size)
        right = rng.random(size) < 0.5
        return ratios, np.where(right, 1.0 - ratios, 0.0)


class FiniteSamplerSpec(BaseModel):
    kind: Literal["finite"] = "finite"
    maps: list[tuple[float, float]] = Field(..., min_length=1, description="Pairs [ratio, translation].")
    p: Optional[list[float]] = Field(None, description="Selection probabilities; uniform when omitted.")

    @model_validator(mode="after")
    def _probabilities_match(self):
        if self.p is not None and len(self.p) != len(self.maps):
            raise ValueError("p must have one entry per map")
        return self

    def build(self) -> MapSampler:
        return FiniteSampler(self.to_ifs())

    def to_ifs(self) -> WeightedIFS:
        maps = tuple(AffineMap(a, t) for a, t in self.maps)
        p = self.p if self.p is not None else [1.0 / len(maps)] * len(maps)
        return WeightedIFS(maps, tuple(p))


class BoxSamplerSpec(BaseModel):
    kind: Literal["box"] = "box"
    ratio_range: tuple[float, float]
    t_range: tuple[float, float]

    @model_validator(mode="after")
    def _contracting(self):
        low, high = self.ratio_range
        if not 0 < low <= high < 1:
            raise ValueError(f"ratio_range must lie in (0, 1): {self.ratio_range}")
        return self

    def build(self) -> MapSampler:
        return BoxSampler(self.ratio_range, self.t_range)


class EndpointSamplerSpec(BaseModel):
    kind: Literal["endpoint"] = "endpoint"
    ratio_range: tuple[float, float]

    @model_validator(mode="after")
    def _contracting(self):
        low, high = self.ratio_range
        if not 0 < low <= high < 1:
            raise ValueError(f"ratio_range must lie in (0, 1): {self.ratio_range}")
        return self

    def build(self) -> MapSampler:
        return EndpointSampler(self.ratio_range)


SamplerSpec = Annotated[
    Union[FiniteSamplerSpec, BoxSamplerSpec, EndpointSamplerSpec], Field(discriminator="kind")
]


# ---------------------------------------------------------------------------
# Stopping times and cylinders
# ---------------------------------------------------------------------------


def stopping_time_compose(sampler: MapSampler, n: int, rng: np.random.Generator) -> tuple[AffineMap, int]:
    """Compose phi_1 o ... o phi_k until the contraction first reaches 2^-n.

    tau is the first k with |phi_1 ... phi_k| <= 2^-n, so tau <= ceil(n / log2(1/r1)).
    """
    if sampler.r1 >= 1:
        raise PreconditionError("sampler is not uniformly contracting")
    threshold = 2.0**-n
    ratio, translation, tau = 1.0, 0.0, 0
    while abs(ratio) > threshold:
        a, t = sampler.draw_many(rng, 1)
        sampler.check(a, t)
        translation += ratio * float(t[0])
        ratio *= float(a[0])
        tau += 1
    return AffineMap(ratio, translation), tau


def stopped_compositions(sampler: MapSampler, n: int, size: int, rng: np.random.Generator):
    """Vectorized stopping_time_compose for `size` independent chains.

    Returns ratios, translations and stopping times.
    """
    if sampler.r1 >= 1:
        raise PreconditionError("sampler is not uniformly contracting")
    threshold = 2.0**-n
    ratios = np.ones(size)
    translations = np.zeros(size)
    taus = np.zeros(size, dtype=np.int64)
    active = np.arange(size)
    while active.size:
        a, t = sampler.draw_many(rng, active.size)
        sampler.check(a, t)
        translations[active] += ratios[active] * t
        ratios[active] *= a
        taus[active] += 1
        active = active[np.abs(ratios[active]) > threshold]
    return ratios, translations, taus


@dataclass(frozen=True, eq=False)
class CylinderSet:
    """The words of Phi_n: compositions stopped at the first contraction <= 2^-n."""

    words: list[tuple[int, ...]]
    weights: np.ndarray
    ratios: np.ndarray
    translations: np.ndarray


def cylinder_decomposition(ifs: WeightedIFS, n: int, max_words: int = 2_000_000) -> CylinderSet:
    threshold = 2.0**-n
    words, weights, ratios, translations = [], [], [], []
    stack = [((), 1.0, 1.0, 0.0)]
    while stack:
        word, weight, ratio, translation = stack.pop()
        if abs(ratio) <= threshold:
            words.append(word)
            weights.append(weight)
            ratios.append(ratio)
            translations.append(translation)
            if len(words) > max_words:
                raise PreconditionError(f"more than {max_words} cylinder words")
            continue
        for letter in reversed(range(len(ifs.maps))):
            phi = ifs.maps[letter]
            stack.append(
                (
                    word + (letter,),
                    weight * ifs.probabilities[letter],
                    ratio * phi.ratio,
                    translation + ratio * phi.translation,
                )
            )
    return CylinderSet(words, np.array(weights), np.array(ratios), np.array(translations))


# ---------------------------------------------------------------------------
# Measures
# ---------------------------------------------------------------------------


def _hutchinson_step(mu: DyadicMeasure1D, ifs: WeightedIFS) -> DyadicMeasure1D:
    images = [pushforward_affine(mu, phi, level=mu.level) for phi in ifs.maps]
    indices = np.concatenate([image.indices for image in images])
    masses = np.concatenate([p * image.masses for p, image in zip(ifs.probabilities, images)])
    return DyadicMeasure1D.from_arrays(mu.level, indices, masses, normalize=False)


def _max_cell_change(first: DyadicMeasure1D, second: DyadicMeasure1D) -> float:
    union = np.union1d(first.indices, second.indices)
    dense = np.zeros((2, union.size))
    dense[0, np.searchsorted(union, first.indices)] = first.masses
    dense[1, np.searchsorted(union, second.indices)] = second.masses
    return float(np.max(np.abs(dense[0] - dense[1])))


def self_similar_measure(ifs: WeightedIFS, n: int, guard: int = 2) -> DyadicMeasure1D:
    """Fixed point of mu -> sum p_phi phi mu, iterated from the uniform measure.

    The iteration runs `guard` levels finer than n and is coarsened at the end.
    """
    work_level = n + guard
    max_depth = math.ceil(n / math.log2(1 / ifs.r1)) + 8
    mu = DyadicMeasure1D.uniform(work_level)
    for depth in range(1, max_depth + 1):
        image = _hutchinson_step(mu, ifs)
        change = _max_cell_change(mu, image)
        mu = image
        if change < CONVERGENCE_TOLERANCE:
            break
    logger.info(f"Self-similar iteration stopped at depth {depth} (last change {change:.3e})")
    return coarsen(mu, guard)


def stationarity_residual(mu: DyadicMeasure1D, ifs: WeightedIFS) -> float:
    """Total variation between mu and its Hutchinson image at level mu.level - 2."""
    shift = min(2, mu.level)
    return total_variation(coarsen(mu, shift), coarsen(_hutchinson_step(mu, ifs), shift))


def chaos_game(ifs: WeightedIFS, samples: int, rng: np.random.Generator, burn_in: int = 48) -> np.ndarray:
    """Endpoints of `samples` independent random orbits of length burn_in."""
    points = rng.random(samples)
    cumulative = np.cumsum(ifs.probabilities)
    for _ in range(burn_in):
        picks = np.minimum(np.searchsorted(cumulative, rng.random(samples), side="right"), len(ifs.maps) - 1)
        points = ifs.ratios[picks] * points + ifs.translations[picks]
    return points


@dataclass(frozen=True, eq=False)
class StationarySample:
    """Empirical stationary measure with its sampling diagnostics."""

    measure: DyadicMeasure1D
    samples: int
    max_standard_error: float
    mean_tau: float


def stationary_measure(
    sampler: MapSampler,
    n: int,
    samples: int = 1_000_000,
    seed: int = 0,
    workers: int = 1,
    seed_point: float = SEED_POINT,
) -> StationarySample:
    """Empirical law of (phi_1 o ... o phi_tau)(x0) with tau = tau_{n+4}."""
    if samples < 1000:
        logger.warning(f"⚠️  Only {samples} Monte-Carlo samples requested (fewer than 10^3)")
    chunk_sizes = [min(CHUNK_SIZE, samples - start) for start in range(0, samples, CHUNK_SIZE)]
    streams = np.random.SeedSequence(seed).spawn(len(chunk_sizes))

    def run_chunk(job):
        stream, size = job
        rng = np.random.default_rng(stream)
        ratios, translations, taus = stopped_compositions(sampler, n + EXTRA_LEVELS, size, rng)
        points = ratios * seed_point + translations
        cells = np.floor(points * 2.0**n).astype(np.int64)
        indices, counts = aggregate_cells(cells, np.ones(size))
        return indices, counts, int(taus.sum())

    jobs = list(zip(streams, chunk_sizes))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_chunk, jobs))
    else:
        results = [run_chunk(job) for job in jobs]

    indices, counts = aggregate_cells(
        np.concatenate([r[0] for r in results]), np.concatenate([r[1] for r in results])
    )
    masses = counts / samples
    measure = DyadicMeasure1D(n, indices, masses)
    standard_error = float(np.sqrt(masses.max() / samples))
    mean_tau = sum(r[2] for r in results) / samples
    logger.info(f"Stationary sample: {samples} draws, {len(measure)} cells, mean tau {mean_tau:.2f}")
    return StationarySample(measure, samples, standard_error, mean_tau)


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------


@dataclass
class SuperadditivityReport:
    table: pd.DataFrame
    constant: float
    passes: bool


def superadditivity_check(
    source: Union[DyadicMeasure1D, Callable[[int], DyadicMeasure1D]],
    grid: Sequence[int] = (4, 8, 12, 16),
    max_constant: float = 4.0,
) -> SuperadditivityReport:
    """Smallest C with a_{m+n} >= a_m + a_n - C over grid pairs, a_n = H(mu, D_n).

    With a measure, pairs need m + n <= its level; with a callable, the
    callable is asked for every level used.
    """
    if isinstance(source, DyadicMeasure1D):
        max_level = source.level

        def a(level: int) -> float:
            return entropy(source, level).value_bits
    else:
        max_level = None

        def a(level: int) -> float:
            return entropy(source(level), level).value_bits

    rows = []
    grid = sorted(set(grid))
    for position, m in enumerate(grid):
        for n in grid[position:]:
            if max_level is not None and m + n > max_level:
                continue
            a_m, a_n, a_sum = a(m), a(n), a(m + n)
            rows.append({"m": m, "n": n, "a_m": a_m, "a_n": a_n, "a_m_plus_n": a_sum, "defect": a_m + a_n - a_sum})
    if not rows:
        raise PreconditionError("no grid pair fits the available resolution")
    table = pd.DataFrame(rows)
    constant = max(0.0, float(table["defect"].max()))
    return SuperadditivityReport(table=table, constant=constant, passes=constant <= max_constant)


@dataclass
class StationaryPorosity:
    verdict: PorosityVerdict
    alpha: float
    mean_component_entropy: float
    std_component_entropy: float
    scale_shift: int
    translation: int


def stationary_porosity_check(
    mu: DyadicMeasure1D, epsilon: float, m: int, n: int, alpha: Optional[float] = None
) -> StationaryPorosity:
    """P_{0<=i<=n}(|(1/m)H(mu_{x,i}, D_{i+m}) - alpha| < epsilon) > 1 - epsilon.

    mu is first moved into [0, 1/2) by x -> 2^-N (x + k). alpha defaults to
    the entropy-dimension slope of the moved measure.
    """
    moved, scale_shift, translation = normalize_support(mu)
    if n + m > moved.level:
        raise PreconditionError(f"scale {n + m} exceeds resolution {moved.level}")
    if alpha is None:
        alpha = entropy_dim_estimate(moved, moved.level).slope
    hits, values, weights = [], [], []
    for i in range(n + 1):
        _, masses, entropies = component_entropies(moved, i, m)
        rates = entropies / m
        hits.append(float(np.sum(masses[np.abs(rates - alpha) < epsilon])))
        values.append(rates)
        weights.append(masses / (n + 1))
    probability = min(max(float(np.mean(hits)), 0.0), 1.0)
    values = np.concatenate(values)
    weights = np.concatenate(weights)
    mean = float(np.sum(weights * values))
    std = float(np.sqrt(max(np.sum(weights * (values - mean) ** 2), 0.0)))
    verdict = PorosityVerdict(
        h=alpha, delta=epsilon, m=m, scale_range=(0, n), probability=probability, passes=probability > 1 - epsilon
    )
    return StationaryPorosity(verdict, alpha, mean, std, scale_shift, translation)
