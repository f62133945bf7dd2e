"""Tests for attractor cell sets, box dimension, porosity and Cantor copies."""

import math

import numpy as np
import pytest

from attractor import (
    CellSet,
    FamilySpec,
    attractor_cells,
    attractor_hull,
    box_dim_estimate,
    cantor_copies_union,
    dimension_table,
    hutchinson_step,
    load_cells,
    porosity_constant,
    porous_entropy_bound,
    save_cells,
    similarity_dimension,
    sinusoidal_ratio_rule,
)
from conftest import CANTOR_DIMENSION
from dyadic_entropy import entropy_dim_estimate
from measure_core import AffineMap, PreconditionError

HALVES = FamilySpec.finite([AffineMap(0.5, 0.0), AffineMap(0.5, 0.5)])
CANTOR = FamilySpec.finite([AffineMap(1 / 3, 0.0), AffineMap(1 / 3, 2 / 3)])
QUARTERS = FamilySpec.finite([AffineMap(0.25, 0.0), AffineMap(0.25, 0.5)])


def test_cell_set_basics():
    cells = CellSet(6, [8, 3, 1, 2, 7, 10, 3])
    assert cells.cells.tolist() == [1, 2, 3, 7, 8, 10]
    starts, stops = cells.runs()
    assert starts.tolist() == [1, 7, 10]
    assert stops.tolist() == [4, 9, 11]
    assert CellSet(6, [5]).dilate(1).cells.tolist() == [4, 5, 6]
    assert CellSet(6, [2, 8]).issubset(cells)
    assert not CellSet(6, [4]).issubset(cells)
    with pytest.raises(PreconditionError):
        CellSet(5, [1]).issubset(cells)


def test_cell_set_files(tmp_path):
    cells = CellSet(9, [-3, 0, 17, 400])
    assert load_cells(save_cells(cells, tmp_path / "cells.json")) == cells


def test_family_validation():
    with pytest.raises(ValueError):
        FamilySpec(())
    with pytest.raises(ValueError, match="non-contracting"):
        FamilySpec.finite([AffineMap(1.0, 0.0)])
    with pytest.raises(ValueError):
        FamilySpec.box((0.5, 1.0), (0.0, 1.0))

    box = FamilySpec.box((0.25, 0.5), (0.0, 0.5), grid_exponent=2)
    assert len(box.maps) == 6
    assert box.grid_exponent == 2
    assert box.r1 == 0.5


def test_attractor_hull():
    assert attractor_hull(CANTOR) == pytest.approx((0.0, 1.0))
    flipped = FamilySpec.finite([AffineMap(-0.5, 1.0), AffineMap(0.5, 0.0)])
    assert attractor_hull(flipped) == pytest.approx((0.0, 1.0), abs=1e-12)


def test_interval_attractors():
    assert len(attractor_cells(HALVES, 10)) == 1024
    box = FamilySpec.box((0.25, 0.5), (0.0, 0.5), grid_exponent=2)
    assert len(attractor_cells(box, 8)) == 256


def test_fixed_point_attractor():
    cells = attractor_cells(FamilySpec.finite([AffineMap(0.5, 0.25)]), 12)
    assert 1 <= len(cells) <= 2
    assert np.all(np.abs(cells.midpoints() - 0.5) < 2.0**-11)


def test_attractor_is_covered_by_its_image():
    cells = attractor_cells(CANTOR, 12)
    assert cells.issubset(hutchinson_step(CANTOR, cells))
    assert not np.any((cells.midpoints() > 0.34) & (cells.midpoints() < 0.66))


def test_box_dimension_of_dyadic_cantor_set():
    cellsets = [attractor_cells(QUARTERS, n) for n in range(8, 19)]
    assert box_dim_estimate(cellsets) == pytest.approx(0.5, abs=0.05)


def test_box_dimension_of_middle_third_cantor_set():
    cellsets = [attractor_cells(CANTOR, n) for n in range(8, 19)]
    table = dimension_table(cellsets)
    assert list(table.columns) == ["level", "count", "log2count"]
    assert box_dim_estimate(cellsets) == pytest.approx(CANTOR_DIMENSION, abs=0.03)


def random_families(seed=2024):
    rng = np.random.default_rng(seed)
    families = []
    for _ in range(12):
        count = int(rng.integers(2, 5))
        ratios = rng.uniform(0.15, 0.8 / count, size=count)
        gap = (1 - ratios.sum()) / (count - 1)
        translations = np.concatenate([[0.0], np.cumsum(ratios[:-1] + gap)])
        families.append(FamilySpec.finite([AffineMap(float(a), float(t)) for a, t in zip(ratios, translations)]))
    for _ in range(8):
        ratios = rng.uniform(0.35, 0.6, size=int(rng.integers(3, 5)))
        families.append(FamilySpec.finite([AffineMap(float(a), float(rng.uniform(0, 1 - a))) for a in ratios]))
    return families


@pytest.mark.slow
@pytest.mark.parametrize("family", random_families())
def test_box_dimension_is_bounded_by_similarity_dimension(family):
    cellsets = [attractor_cells(family, n) for n in range(8, 19)]
    assert box_dim_estimate(cellsets) <= min(1.0, similarity_dimension(family.maps)) + 0.05


def test_box_dimension_dominates_entropy_dimension(cantor):
    cellsets = [attractor_cells(CANTOR, n) for n in range(6, 21)]
    assert box_dim_estimate(cellsets) >= entropy_dim_estimate(cantor, 20).upper - 0.15


def test_box_dimension_preconditions():
    with pytest.raises(PreconditionError):
        box_dim_estimate([CellSet(n, [0]) for n in range(3)])
    assert box_dim_estimate([CellSet(n, [0]) for n in range(4, 8)]) == 0.0


def test_similarity_dimension():
    assert similarity_dimension([0.5, 0.5]) == pytest.approx(1.0)
    assert similarity_dimension(CANTOR.maps) == pytest.approx(CANTOR_DIMENSION)
    golden = (1 + math.sqrt(5)) / 2
    assert similarity_dimension([AffineMap(0.5, 0.0), AffineMap(-0.25, 1.0)]) == pytest.approx(math.log2(golden))
    with pytest.raises(ValueError):
        similarity_dimension([0.5, 1.0])
    with pytest.raises(ValueError):
        similarity_dimension([])


def test_porosity_constant():
    assert porosity_constant(CellSet(10, np.arange(1024))) == 0.0
    assert porosity_constant(CellSet(10, [0])) == 0.5

    cantor = [attractor_cells(CANTOR, n) for n in (12, 14)]
    assert porosity_constant(cantor) >= 0.025
    assert porosity_constant(attractor_cells(CANTOR, 18)) >= 0.2
    with pytest.raises(PreconditionError):
        porosity_constant(CellSet(8, []))


def test_porous_entropy_bound():
    bound = porous_entropy_bound(0.25)
    assert bound.m == 4
    assert bound.entropy_bound == pytest.approx(math.log2(15) / 4)
    with pytest.raises(ValueError):
        porous_entropy_bound(0.0)


def test_cantor_copy_of_a_single_center():
    center = CellSet(12, [2048])
    full = cantor_copies_union(center, 1.0)
    assert full.cells.min() >= -1 and full.cells.max() <= 4097
    assert 100 < len(full) < 1024
    assert not np.any((full.cells > 1400) & (full.cells < 2700))

    half = cantor_copies_union(center, 0.5)
    assert len(half) < len(full)
    assert half.cells.min() >= 1023 and half.cells.max() <= 3073


def test_cantor_copies_over_many_centers():
    centers = attractor_cells(CANTOR, 10)
    union = cantor_copies_union(centers, 0.5)
    assert union.level == 10
    assert len(union) > len(centers)

    rule = sinusoidal_ratio_rule(0.2, 0.6, seed=7)
    varied = cantor_copies_union(centers, rule)
    assert len(varied) > 0


def test_cantor_copies_preconditions():
    with pytest.raises(PreconditionError, match="no centers"):
        cantor_copies_union(CellSet(8, []), 0.5)
    with pytest.raises(PreconditionError):
        cantor_copies_union(CellSet(8, [3]), 1.5)
    with pytest.raises(PreconditionError):
        cantor_copies_union(CellSet(8, [3]), lambda points: np.zeros_like(points))


def test_sinusoidal_ratio_rule():
    points = np.linspace(0.0, 1.0, 500)
    values = sinusoidal_ratio_rule(0.2, 0.6, seed=3)(points)
    assert np.all((values >= 0.2) & (values <= 0.6))
    assert values.std() > 0
    assert np.array_equal(values, sinusoidal_ratio_rule(0.2, 0.6, seed=3)(points))


@pytest.mark.slow
def test_cantor_copies_exceed_the_cantor_dimension():
    ratio = 2**-2.5
    centers = FamilySpec.finite([AffineMap(ratio, 0.0), AffineMap(ratio, 1 - ratio)])
    assert similarity_dimension(centers.maps) == pytest.approx(0.4)

    rule = sinusoidal_ratio_rule(0.5, 1.0, seed=0)
    cellsets = [cantor_copies_union(attractor_cells(centers, n), rule) for n in range(10, 19)]
    assert box_dim_estimate(cellsets) - CANTOR_DIMENSION >= 0.02
