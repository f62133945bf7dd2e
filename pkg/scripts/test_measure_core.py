"""Tests for dyadic measures on R and G and the operations on them."""

import numpy as np
import pytest

from measure_core import (
    MAX_LEVEL_R,
    AffineMap,
    DyadicMeasure1D,
    DyadicMeasureG,
    PreconditionError,
    MeasureDocument,
    coarsen,
    coarsen_G,
    component,
    component_at,
    component_distribution,
    component_distribution_G,
    components_of_components_tv,
    condition,
    load_measure,
    marginal,
    measure_from_document,
    normalize_support,
    product,
    pushforward_affine,
    save_measure,
    total_variation,
)


def test_affine_map_algebra():
    phi = AffineMap(0.5, 1.0)
    psi = AffineMap(3.0, -2.0)
    assert phi.compose(psi)(0.25) == pytest.approx(phi(psi(0.25)))
    assert phi.compose(phi.inverse()) == AffineMap.identity()
    assert AffineMap.from_log_scale(*phi.log_scale()).ratio == pytest.approx(0.5)

    with pytest.raises(ValueError):
        AffineMap(0.0, 1.0)
    with pytest.raises(PreconditionError):
        AffineMap(-0.5, 0.0).log_scale()


def test_uniform_measure():
    mu = DyadicMeasure1D.uniform(10)
    assert len(mu) == 1024
    assert mu.total_mass == pytest.approx(1.0)
    assert mu.support_bounds == (0.0, 1.0)


def test_from_arrays_aggregates_and_normalizes():
    mu = DyadicMeasure1D.from_arrays(4, [3, 1, 3, 5], [1.0, 2.0, 1.0, 4.0])
    assert mu.cells == pytest.approx({1: 0.25, 3: 0.25, 5: 0.5})


def test_invalid_measures():
    with pytest.raises(ValueError):
        DyadicMeasure1D.from_arrays(4, [1, 2], [1.0, -0.5])
    with pytest.raises(ValueError):
        DyadicMeasure1D(4, [], [])
    with pytest.raises(ValueError):
        DyadicMeasure1D(4, [2, 1], [0.5, 0.5])
    with pytest.raises(PreconditionError):
        DyadicMeasure1D.uniform(MAX_LEVEL_R + 1, 0, 4)


def test_coarsen_uniform():
    coarse = coarsen(DyadicMeasure1D.uniform(10), 3)
    assert coarse.level == 7
    assert len(coarse) == 128
    assert np.allclose(coarse.masses, 1 / 128)


def test_coarsen_preserves_mass(random_measures):
    for mu in random_measures:
        for m in (1, 5, 14):
            assert coarsen(mu, m).total_mass == pytest.approx(1.0)
    with pytest.raises(PreconditionError):
        coarsen(random_measures[0], 15)


def test_components(random_measures):
    mu = random_measures[-1]
    k = int(mu.indices[len(mu) // 2] >> 8)
    comp = component(mu, k, 6)
    assert comp.total_mass == pytest.approx(1.0)
    assert np.all(comp.indices >> 8 == k)
    assert comp.masses == pytest.approx(mu.masses[mu.indices >> 8 == k] / mu.mass_of_cell(k, 6))

    x = float(mu.midpoints()[0])
    assert np.array_equal(component_at(mu, x, 6).indices, component(mu, int(mu.indices[0] >> 8), 6).indices)

    with pytest.raises(PreconditionError):
        component(DyadicMeasure1D.dirac(6, 0), 1, 3)


def test_condition():
    mu = DyadicMeasure1D.uniform(4)
    restricted = condition(mu, [2, 3])
    assert restricted.cells == pytest.approx({2: 0.5, 3: 0.5})
    with pytest.raises(PreconditionError, match="empty condition"):
        condition(DyadicMeasure1D.dirac(4, 0), [5])


def test_component_distribution_weights(random_measures):
    mu = random_measures[2]
    samples = component_distribution(mu, 8)
    assert sum(sample.weight for sample in samples) == pytest.approx(1.0)
    assert all(sample.component.total_mass == pytest.approx(1.0) for sample in samples)


def test_product_measure_on_G():
    s_measure = DyadicMeasure1D.from_cells(6, {0: 0.25, 3: 0.75})
    t_measure = DyadicMeasure1D.uniform(6, 10, 14)
    nu = DyadicMeasureG.product_of(s_measure, t_measure)
    assert len(nu) == 8
    assert nu.total_mass == pytest.approx(1.0)
    assert marginal(nu, "s").cells == pytest.approx(s_measure.cells)
    assert marginal(nu, "t").cells == pytest.approx(t_measure.cells)
    assert coarsen_G(nu, 6).total_mass == pytest.approx(1.0)

    samples = component_distribution_G(nu, 3)
    assert sum(sample.weight for sample in samples) == pytest.approx(1.0)

    joint = product(nu, DyadicMeasure1D.uniform(6, 0, 4))
    assert joint.total_mass == pytest.approx(1.0)
    assert joint.marginal_R().cells == pytest.approx(DyadicMeasure1D.uniform(6, 0, 4).cells)


def test_pushforward_halving():
    mu = DyadicMeasure1D.uniform(8)
    image = pushforward_affine(mu, AffineMap(0.5, 0.0))
    assert image.level == 9
    assert image.support_bounds == (0.0, 0.5)
    assert np.allclose(image.masses, 1 / 256)


def test_pushforward_translation():
    mu = DyadicMeasure1D.from_cells(6, {1: 0.5, 9: 0.5})
    shifted = pushforward_affine(mu, AffineMap(1.0, 1.0), level=6)
    assert shifted.cells == pytest.approx({65: 0.5, 73: 0.5})


def test_total_variation():
    mu = DyadicMeasure1D.uniform(5)
    assert total_variation(mu, mu) == 0.0
    assert total_variation(DyadicMeasure1D.dirac(5, 0), DyadicMeasure1D.dirac(5, 1)) == pytest.approx(1.0)
    with pytest.raises(PreconditionError):
        total_variation(mu, DyadicMeasure1D.uniform(4))


def test_normalize_support(random_measures):
    negative = DyadicMeasure1D.dirac(4, -3)
    moved, n_shift, k = normalize_support(negative)
    assert (n_shift, k) == (1, 1)
    assert moved.indices.tolist() == [13]

    for mu in random_measures + [DyadicMeasure1D.uniform(4)]:
        moved, n_shift, k = normalize_support(mu)
        low, high = moved.support_bounds
        assert 0.0 <= low and high <= 0.5
        assert moved.level == mu.level + n_shift


def test_normalize_support_at_the_finest_level():
    mu = DyadicMeasure1D.from_arrays(MAX_LEVEL_R, [0, 2**25 + 5], [0.5, 0.5])
    moved, n_shift, k = normalize_support(mu)
    assert (moved.level, n_shift, k) == (MAX_LEVEL_R, 1, 0)
    assert moved.indices.tolist() == [0, 2**24 + 2]
    assert moved.total_mass == pytest.approx(1.0)

    moved, n_shift, k = normalize_support(DyadicMeasure1D.dirac(MAX_LEVEL_R, -3))
    assert (moved.level, n_shift, k) == (MAX_LEVEL_R, 1, 1)
    low, high = moved.support_bounds
    assert 0.0 <= low and high <= 0.5

    inside = DyadicMeasure1D.dirac(MAX_LEVEL_R, 5)
    moved, n_shift, k = normalize_support(inside)
    assert (moved.level, moved.indices.tolist(), n_shift, k) == (MAX_LEVEL_R, [5], 0, 0)


def test_components_of_components_distance():
    mu = DyadicMeasure1D.uniform(16)
    for n, m in ((8, 2), (10, 4)):
        assert components_of_components_tv(mu, n, m) == pytest.approx(m / (2 * (n + 1)))
    with pytest.raises(PreconditionError):
        components_of_components_tv(mu, 14, 4)


def test_mixture():
    mixed = DyadicMeasure1D.dirac(3, 0).mixture(DyadicMeasure1D.dirac(3, 7), 0.25)
    assert mixed.cells == pytest.approx({0: 0.25, 7: 0.75})


def test_measure_json_files(tmp_path, random_measures):
    mu = random_measures[3]
    loaded = load_measure(save_measure(mu, tmp_path / "nested" / "mu.json"))
    assert loaded.level == mu.level
    assert np.array_equal(loaded.indices, mu.indices)
    assert np.allclose(loaded.masses, mu.masses, rtol=1e-15)

    nu = DyadicMeasureG.from_cells(5, {(0, 1): 0.5, (-2, 3): 0.5})
    loaded_nu = load_measure(save_measure(nu, tmp_path / "nu.json"))
    assert loaded_nu.cells == pytest.approx(nu.cells)


def test_measure_document_rows_are_checked():
    with pytest.raises(ValueError):
        measure_from_document(MeasureDocument(space="R", level=3, cells=[[1, 2, 0.5]]))
