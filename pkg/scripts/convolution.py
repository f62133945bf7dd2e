"""Convolution on R, the action convolution of G on R, and its linearization.

Cell conventions: an R cell k stands for its midpoint (k + 1/2)/2^n. A G cell
(k1, k2) stands for its lower corner (s, t) = (k1, k2)/2^n, i.e. the map
x -> e^s x + t. With these conventions a pair of R cells (j, k) convolves into
cell j + k, and a translation cell acts on R cells by shifting the index.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from dyadic_entropy import (
    PorosityVerdict,
    entropy,
    entropy_G,
    entropy_of_masses,
    entropy_porosity_test,
)
from measure_core import (
    MASS_FLOOR,
    AffineMap,
    DyadicMeasure1D,
    DyadicMeasureG,
    PreconditionError,
    aggregate_cells,
    coarsen_G,
    coarsen_to,
    group_starts,
    pushforward_affine,
)

logger = logging.getLogger(__name__)

DIRECT_PAIR_LIMIT = 1 << 22
MAX_DENSE_CELLS = 1 << 28


def fft_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Full linear convolution of two dense arrays through a real FFT."""
    size = a.size + b.size - 1
    nfft = 1 << (size - 1).bit_length()
    result = np.fft.irfft(np.fft.rfft(a, nfft) * np.fft.rfft(b, nfft), nfft)[:size]
    return result


def convolve_cells(idx_a, mass_a, idx_b, mass_b):
    """Index-sum convolution of two sparse histograms; returns aggregated (indices, masses)."""
    if idx_a.size * idx_b.size <= DIRECT_PAIR_LIMIT:
        return aggregate_cells(np.add.outer(idx_a, idx_b), np.outer(mass_a, mass_b))
    lo_a, lo_b = int(idx_a[0]), int(idx_b[0])
    dense_a = np.zeros(int(idx_a[-1]) - lo_a + 1)
    dense_b = np.zeros(int(idx_b[-1]) - lo_b + 1)
    if dense_a.size + dense_b.size > MAX_DENSE_CELLS:
        raise PreconditionError("support too wide for dense convolution")
    dense_a[idx_a - lo_a] = mass_a
    dense_b[idx_b - lo_b] = mass_b
    dense = fft_convolve(dense_a, dense_b)
    # FFT round-off leaves noise of order 1e-16 in empty cells
    keep = dense > MASS_FLOOR
    masses = dense[keep]
    masses *= float(np.sum(mass_a)) * float(np.sum(mass_b)) / float(np.sum(masses))
    return np.flatnonzero(keep).astype(np.int64) + lo_a + lo_b, masses


def _canonical_key(measure: DyadicMeasure1D):
    return (len(measure), measure.indices.tobytes(), measure.masses.tobytes())


def convolve_R(nu: DyadicMeasure1D, mu: DyadicMeasure1D) -> DyadicMeasure1D:
    """Push-forward of nu x mu under (x, y) -> x + y, at the common level."""
    if nu.level != mu.level:
        raise PreconditionError(f"level mismatch: {nu.level} != {mu.level}")
    first, second = sorted((nu, mu), key=_canonical_key)
    indices, masses = convolve_cells(first.indices, first.masses, second.indices, second.masses)
    return DyadicMeasure1D(mu.level, indices, masses)


def _scaled_indices(indices: np.ndarray, ratio: float) -> np.ndarray:
    """Cells of ratio * midpoint at the same level."""
    return np.floor(ratio * (indices + 0.5)).astype(np.int64)


def act_convolve(nu: DyadicMeasureG, mu: DyadicMeasure1D, workers: int = 1) -> DyadicMeasure1D:
    """Push-forward of nu x mu under (phi, x) -> phi(x), kept at the input level.

    Rows of nu with a common s act by the same scaling, so each row is a scaled
    copy of mu convolved with the row's translations.
    """
    if nu.level != mu.level:
        raise PreconditionError(f"level mismatch: {nu.level} != {mu.level}")
    starts = group_starts(nu.k1)
    bounds = np.append(starts, nu.k1.size)
    scale = 2.0**-nu.level
    rows = [(math.exp(int(nu.k1[start]) * scale), start, stop) for start, stop in zip(starts, bounds[1:])]

    lows, highs = [], []
    for ratio, start, stop in rows:
        # a > 0, so scaled indices are monotone in the cell index
        end_points = _scaled_indices(mu.indices[[0, -1]], ratio)
        lows.append(int(end_points[0]) + int(nu.k2[start]))
        highs.append(int(end_points[1]) + int(nu.k2[stop - 1]))
    offset = min(lows)
    width = max(highs) - offset + 1
    if width > MAX_DENSE_CELLS:
        raise PreconditionError("action convolution output too wide")
    accumulator = np.zeros(width)

    def row_image(row):
        ratio, start, stop = row
        scaled, scaled_mass = aggregate_cells(_scaled_indices(mu.indices, ratio), mu.masses)
        return convolve_cells(scaled, scaled_mass, nu.k2[start:stop], nu.masses[start:stop])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            images = list(pool.map(row_image, rows))
    else:
        images = (row_image(row) for row in rows)
    for indices, masses in images:
        np.add.at(accumulator, indices - offset, masses)

    keep = np.flatnonzero(accumulator > 0)
    logger.debug(f"Action convolution over {len(rows)} scale rows into {keep.size} cells")
    return DyadicMeasure1D(mu.level, keep.astype(np.int64) + offset, accumulator[keep])


# ---------------------------------------------------------------------------
# Derivative and linearization
# ---------------------------------------------------------------------------


GroupPoint = Union[tuple[float, float], AffineMap]


def _log_coordinates(phi: GroupPoint) -> tuple[float, float]:
    if isinstance(phi, AffineMap):
        return phi.log_scale()
    return float(phi[0]), float(phi[1])


@dataclass(frozen=True)
class ActionDerivative:
    """Partial derivatives of f(phi, x) = e^s x + t at a base point."""

    A: tuple[float, float]
    B: float
    base: tuple[tuple[float, float], float]

    @property
    def C(self) -> tuple[float, float]:
        """B^-1 A."""
        return self.A[0] / self.B, self.A[1] / self.B

    def value(self) -> float:
        (s, t), x = self.base
        return math.exp(s) * x + t

    def first_order(self, phi: GroupPoint, x: float) -> float:
        """f(base) + A (phi - phi0) + B (x - x0)."""
        s, t = _log_coordinates(phi)
        (s0, t0), x0 = self.base
        return self.value() + self.A[0] * (s - s0) + self.A[1] * (t - t0) + self.B * (x - x0)


def derivative(phi: GroupPoint, x: float) -> ActionDerivative:
    s, t = _log_coordinates(phi)
    scale = math.exp(s)
    return ActionDerivative(A=(scale * x, 1.0), B=scale, base=((s, t), float(x)))


def _linear_image(nu: DyadicMeasureG, functional: Sequence[float], origin: tuple[float, float], level: int) -> DyadicMeasure1D:
    s, t = nu.lower_corners()
    values = functional[0] * (s - origin[0]) + functional[1] * (t - origin[1])
    return DyadicMeasure1D.from_points(values, level, weights=nu.masses)


def linearized_convolve(
    nu_component: DyadicMeasureG, mu_component: DyadicMeasure1D, base: tuple[GroupPoint, float]
) -> DyadicMeasure1D:
    """(B^-1 A) nu' * mu' for the derivative at base = (phi, x).

    The functional is applied to nu' relative to phi, so the output sits next to mu'.
    """
    phi, x = base
    origin = _log_coordinates(phi)
    image = _linear_image(nu_component, derivative(origin, x).C, origin, mu_component.level)
    return convolve_R(image, mu_component)


def linearization_gap(
    nu_component: DyadicMeasureG,
    mu_component: DyadicMeasure1D,
    base: tuple[GroupPoint, float],
    m: int,
    i: int,
) -> float:
    """|H(nu'.mu', D_{i+m}) - H(first-order image, D_{i+m})| for level-i components.

    The first-order image is A nu' * B mu' placed at f(base), which is the
    linearized convolution scaled by B and moved by the base translation.
    """
    if m > i:
        raise PreconditionError(f"m={m} > i={i}: quadratic error exceeds the scale")
    level = mu_component.level
    if i + m > level:
        raise PreconditionError(f"scale {i + m} exceeds resolution {level}")
    phi, x = base
    s0, t0 = _log_coordinates(phi)
    exact = act_convolve(nu_component, mu_component)
    approximation = pushforward_affine(
        linearized_convolve(nu_component, mu_component, base), AffineMap(math.exp(s0), t0), level=level
    )
    return abs(entropy(exact, i + m).value_bits - entropy(approximation, i + m).value_bits)


class SeparationVerdict(BaseModel):
    """max_j H(g_j theta, D_i) against (1/2) H(theta, D_i) - 2 log2 c - 4."""

    image_entropies: tuple[float, float]
    theta_entropy: float
    constant: float = Field(..., ge=1, description="Bi-Lipschitz constant of the pair.")
    bound: float
    holds: bool


def separation_entropy_bound(
    theta: DyadicMeasureG, g1: Sequence[float], g2: Sequence[float], level: int
) -> SeparationVerdict:
    matrix = np.array([list(g1), list(g2)], dtype=np.float64)
    singular = np.linalg.svd(matrix, compute_uv=False)
    if singular[-1] < 1e-12:
        raise PreconditionError("singular pair of functionals")
    constant = float(max(singular[0], 1.0 / singular[-1], 1.0))
    theta_entropy = entropy_G(theta, level).value_bits
    images = tuple(
        entropy(_linear_image(theta, g, (0.0, 0.0), level), level).value_bits for g in (g1, g2)
    )
    bound = 0.5 * theta_entropy - 2 * math.log2(constant) - 4
    return SeparationVerdict(
        image_entropies=images,
        theta_entropy=theta_entropy,
        constant=constant,
        bound=bound,
        holds=max(images) >= bound,
    )


# ---------------------------------------------------------------------------
# Experiment harnesses
# ---------------------------------------------------------------------------


def stabilizer_measure(scale_measure: DyadicMeasure1D, x0: float) -> DyadicMeasureG:
    """Lift a measure on s to the maps x -> e^s (x - x0) + x0 fixing x0."""
    s = scale_measure.indices * 2.0**-scale_measure.level
    t = x0 * (1.0 - np.exp(s))
    k2 = np.floor(t * 2.0**scale_measure.level).astype(np.int64)
    return DyadicMeasureG.from_arrays(scale_measure.level, scale_measure.indices, k2, scale_measure.masses)


def translation_measure(t_measure: DyadicMeasure1D) -> DyadicMeasureG:
    """Pure translations x -> x + t distributed like t_measure."""
    return DyadicMeasureG.from_arrays(
        t_measure.level, np.zeros(len(t_measure), dtype=np.int64), t_measure.indices, t_measure.masses
    )


@dataclass
class GrowthExperiment:
    """Per-level entropies of mu and nu.mu with the precondition diagnostics."""

    table: pd.DataFrame
    min_tail_gap: float
    porosity: Optional[PorosityVerdict] = None
    warnings: list[str] = field(default_factory=list)


def entropy_growth_experiment(
    nu: DyadicMeasureG,
    mu: DyadicMeasure1D,
    levels: Sequence[int],
    epsilon: float = 0.1,
    delta: float = 0.1,
    m: int = 4,
    workers: int = 1,
) -> GrowthExperiment:
    """Tabulate (1/n)H(mu), (1/n)H(nu.mu) and their gap over the given levels.

    Precondition failures (mu not (1-epsilon)-entropy porous, nu of low
    entropy) are logged and recorded; the table is computed regardless.
    """
    levels = sorted(levels)
    if levels[-1] > min(mu.level, nu.level):
        raise PreconditionError(f"level {levels[-1]} exceeds the resolution of the inputs")
    warnings = []
    porosity = None
    if mu.level - m >= 0:
        porosity = entropy_porosity_test(mu, 1 - epsilon, delta, m, 0, mu.level - m, workers=workers)
        if not porosity.passes:
            warnings.append(f"mu is not (1-epsilon)-entropy porous: p={porosity.probability:.4f}")
    nu_rate = entropy_G(coarsen_G(nu, nu.level - levels[-1]), levels[-1]).value_bits / levels[-1]
    if nu_rate <= epsilon:
        warnings.append(f"(1/n)H(nu) = {nu_rate:.4f} does not exceed epsilon={epsilon}")
    for message in warnings:
        logger.warning(f"⚠️  {message}")

    rows = []
    for n in levels:
        mu_n = coarsen_to(mu, n)
        nu_n = coarsen_G(nu, nu.level - n)
        h_mu = entropy(mu_n).value_bits / n
        h_conv = entropy(act_convolve(nu_n, mu_n, workers=workers)).value_bits / n
        rows.append({"n": n, "H_mu_over_n": h_mu, "H_conv_over_n": h_conv, "gap": h_conv - h_mu})
        logger.info(f"Growth level {n}: gap {h_conv - h_mu:.4f}")
    table = pd.DataFrame(rows, columns=["n", "H_mu_over_n", "H_conv_over_n", "gap"])
    tail = table["gap"].iloc[len(table) // 2 :]
    return GrowthExperiment(table=table, min_tail_gap=float(tail.min()), porosity=porosity, warnings=warnings)


def _component_pairs(nu_cells, mu_cells, max_pairs, rng):
    """All pairs of component indices, or a weighted sample of them when there are too many."""
    (_, nu_weights), (_, mu_weights) = nu_cells, mu_cells
    total = nu_weights.size * mu_weights.size
    if total <= max_pairs:
        a, b = np.meshgrid(np.arange(nu_weights.size), np.arange(mu_weights.size), indexing="ij")
        return a.reshape(-1), b.reshape(-1), np.outer(nu_weights, mu_weights).reshape(-1)
    a = rng.choice(nu_weights.size, size=max_pairs, p=nu_weights / nu_weights.sum())
    b = rng.choice(mu_weights.size, size=max_pairs, p=mu_weights / mu_weights.sum())
    return a, b, np.full(max_pairs, 1.0 / max_pairs)


def _level_components(measure: DyadicMeasure1D, i: int, m: int):
    """(start offsets, masses) of the level-i components of the level-(i+m) histogram."""
    fine = coarsen_to(measure, i + m)
    starts = group_starts(fine.indices >> m)
    return fine, starts, np.add.reduceat(fine.masses, starts)


def multiscale_convolution_check(
    nu: DyadicMeasure1D,
    mu: DyadicMeasure1D,
    m: int,
    n: int,
    max_pairs: int = 20000,
    rng: Optional[np.random.Generator] = None,
) -> tuple[float, float, float]:
    """Compare (1/n)H(nu*mu, D_n) with E_i (1/m)H(nu_{y,i} * mu_{x,i}, D_{i+m}).

    Returns (lhs, rhs, slack) where slack = 4 (1/m + m/n); the bound holds when
    lhs >= rhs - slack.
    """
    if n + m > min(nu.level, mu.level):
        raise PreconditionError(f"scale {n + m} exceeds resolution")
    rng = np.random.default_rng(0) if rng is None else rng
    lhs = entropy(convolve_R(coarsen_to(nu, n), coarsen_to(mu, n))).value_bits / n
    averages = []
    for i in range(1, n + 1):
        nu_fine, nu_starts, nu_weights = _level_components(nu, i, m)
        mu_fine, mu_starts, mu_weights = _level_components(mu, i, m)
        nu_bounds = np.append(nu_starts, nu_fine.indices.size)
        mu_bounds = np.append(mu_starts, mu_fine.indices.size)
        first, second, weights = _component_pairs(
            (nu_starts, nu_weights), (mu_starts, mu_weights), max_pairs, rng
        )
        values = np.empty(first.size)
        for row, (a, b) in enumerate(zip(first, second)):
            idx_a = nu_fine.indices[nu_bounds[a] : nu_bounds[a + 1]]
            idx_b = mu_fine.indices[mu_bounds[b] : mu_bounds[b + 1]]
            _, masses = convolve_cells(
                idx_a,
                nu_fine.masses[nu_bounds[a] : nu_bounds[a + 1]] / nu_weights[a],
                idx_b,
                mu_fine.masses[mu_bounds[b] : mu_bounds[b + 1]] / mu_weights[b],
            )
            values[row] = entropy_of_masses(masses / masses.sum())
        averages.append(float(np.sum(weights * values)) / m)
    rhs = float(np.mean(averages))
    return lhs, rhs, 4.0 * (1.0 / m + m / n)


def iterated_action_entropy(
    nu: DyadicMeasureG,
    mu: DyadicMeasure1D,
    m: int,
    n: int,
    samples: int = 64,
    rng: Optional[np.random.Generator] = None,
) -> tuple[float, float]:
    """(1/n)H(nu.mu, D_n) next to the sampled average E_i (1/m)H(C nu_{g,i} * mu_{x,i}, D_{i+m}).

    Components are drawn per level with probability nu(I) mu(J); the base
    point of each pair is the lower corner of the nu cell and the left end of
    the mu cell.
    """
    if n + m > min(nu.level, mu.level):
        raise PreconditionError(f"scale {n + m} exceeds resolution")
    rng = np.random.default_rng(0) if rng is None else rng
    direct = entropy(act_convolve(coarsen_G(nu, nu.level - n), coarsen_to(mu, n))).value_bits / n
    averages = []
    for i in range(1, n + 1):
        nu_fine = coarsen_G(nu, nu.level - (i + m))
        mu_fine = coarsen_to(mu, i + m)
        nu_parent = (nu_fine.k1 >> m, nu_fine.k2 >> m)
        mu_parent = mu_fine.indices >> m
        picks_nu = rng.choice(len(nu_fine), size=samples, p=nu_fine.masses / nu_fine.masses.sum())
        picks_mu = rng.choice(len(mu_fine), size=samples, p=mu_fine.masses / mu_fine.masses.sum())
        values = []
        for a, b in zip(picks_nu, picks_mu):
            cell = (nu_parent[0][a], nu_parent[1][a])
            inside_nu = (nu_parent[0] == cell[0]) & (nu_parent[1] == cell[1])
            inside_mu = mu_parent == mu_parent[b]
            nu_component = DyadicMeasureG.from_arrays(
                i + m, nu_fine.k1[inside_nu], nu_fine.k2[inside_nu], nu_fine.masses[inside_nu]
            )
            mu_component = DyadicMeasure1D.from_arrays(i + m, mu_fine.indices[inside_mu], mu_fine.masses[inside_mu])
            base = ((cell[0] * 2.0**-i, cell[1] * 2.0**-i), mu_parent[b] * 2.0**-i)
            values.append(entropy(linearized_convolve(nu_component, mu_component, base)).value_bits / m)
        averages.append(float(np.mean(values)))
    return direct, float(np.mean(averages))
