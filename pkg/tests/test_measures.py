import numpy as np
import pytest
from numpy.testing import assert_allclose

from errors import DimensionMismatchError
from measures import (ConeModel, DiscreteMeasure, as_point, cone_contains, merge_atoms,
                      min_hull_norm, moments, zero_in_convex_hull)


def test_midpoint_grid_atoms_and_mass(grid4):
    assert_allclose(grid4.scalar_atoms(), [0.125, 0.375, 0.625, 0.875])
    assert grid4.mass == pytest.approx(1.0)
    assert grid4.is_probability()


def test_measure_rejects_bad_input():
    with pytest.raises(ValueError):
        DiscreteMeasure([[0.0], [1.0]], [0.5, -0.5])
    with pytest.raises(ValueError):
        DiscreteMeasure([[1.0], [1.0]], [0.5, 0.5])
    with pytest.raises(DimensionMismatchError):
        DiscreteMeasure([[0.0], [1.0]], [1.0])


def test_measure_copies_caller_arrays():
    atoms = np.array([[0.0], [1.0]])
    DiscreteMeasure(atoms, [0.5, 0.5])
    atoms[0, 0] = 3.0
    assert atoms[0, 0] == 3.0


def test_zero_weight_atoms_are_kept():
    mu = DiscreteMeasure([[0.0], [1.0]], [1.0, 0.0])
    assert mu.n == 2
    assert list(mu.support_mask) == [True, False]


def test_scalar_atoms_requires_dim_one():
    mu = DiscreteMeasure([[0.0, 1.0]], [1.0])
    with pytest.raises(DimensionMismatchError):
        mu.scalar_atoms()


def test_as_point_checks_dimension():
    assert_allclose(as_point(2.0), [2.0])
    with pytest.raises(DimensionMismatchError):
        as_point([1.0, 2.0], dim=3)


def test_merge_atoms_sums_coincident_weights():
    merged, inverse = merge_atoms([[1.0], [1.0], [2.0]], [0.2, 0.3, 0.5])
    assert_allclose(merged.scalar_atoms(), [1.0, 2.0])
    assert_allclose(merged.weights, [0.5, 0.5])
    assert list(inverse) == [0, 0, 1]


def test_cone_membership():
    cone = ConeModel([[1.0, 0.0], [0.0, 1.0]])
    assert cone_contains(cone, [1.0, 2.0])
    assert not cone_contains(cone, [-1.0, 0.0])


@pytest.mark.parametrize('gens, expected', [
    ([[1.0], [-1.0]], True),
    ([[1.0], [2.0]], False),
    ([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]], True),
])
def test_zero_in_convex_hull(gens, expected):
    assert zero_in_convex_hull(ConeModel(gens)) is expected


def test_min_hull_norm():
    assert min_hull_norm(ConeModel([[1.0, 0.0], [0.0, 1.0]])) == pytest.approx(1 / np.sqrt(2), abs=1e-6)
    assert min_hull_norm(ConeModel([[2.0], [3.0]])) == pytest.approx(2.0, abs=1e-9)


def test_moments():
    m = moments(DiscreteMeasure([[-1.0], [2.0]], [0.5, 0.5]))
    assert m.mass == pytest.approx(1.0)
    assert_allclose(m.mean, [0.5])
    assert_allclose(m.positive_part, [1.0])
    assert_allclose(m.negative_part, [0.5])
