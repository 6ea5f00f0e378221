import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from costs import (CompositeCost, PowerF, QuadraticF, neglog_g, quadratic_g,
                   squared_distance_cost)
from dual import (ConicalPotential, DualPotential, K_c, Q_F, check_nonpositive_conical_dual,
                  dual_bound_conical, dual_report, dual_value, minorant, optimality_conditions_GF,
                  read_directions, read_potential_csv, write_directions, write_potential_csv)
from errors import DimensionMismatchError, MethodMismatchError
from measures import DiscreteMeasure
from order import monotone_support_check
from primal import solve_primal
from validation import random_measure, random_piecewise_cost


# =============================================
# POTENCIAIS E MINORANTE
# =============================================

def test_dual_potential_must_be_finite():
    with pytest.raises(ValueError):
        DualPotential([1.0, math.inf])
    assert_allclose(DualPotential([1.0, 2.0]).shifted(1, 0.5).f, [1.0, 2.5])


def test_conical_potential_evaluation():
    phi = ConicalPotential([[1.0, 0.0], [0.0, 2.0]])
    assert phi([1.0, 1.0]) == pytest.approx(2.0)
    assert_allclose(phi.on_atoms([[3.0, 1.0], [0.0, 1.0]]), [3.0, 2.0])
    assert phi.scaled(0.5)([1.0, 1.0]) == pytest.approx(1.0)


def test_minorant_oracle_and_vertices_1d():
    Y = [[1.0], [2.0]]
    f = [1.0, 3.0]
    oracle = minorant(f, Y)
    assert oracle([4.0]) == pytest.approx(4.0)
    assert oracle([-1.0]) == math.inf
    phi = ConicalPotential.from_minorant(f, Y)
    assert_allclose(phi.directions, [[1.0]])


def test_minorant_vertices_2d():
    phi = ConicalPotential.from_minorant([1.0, 2.0], [[1.0, 0.0], [0.0, 1.0]])
    assert_allclose(phi.directions, [[1.0, 2.0]])


def test_minorant_vertices_on_collinear_generators():
    phi = ConicalPotential.from_minorant([1.0, 2.0], [[1.0, 1.0], [2.0, 2.0]])
    assert_allclose(phi.directions, [[0.5, 0.5]], atol=1e-12)
    assert phi([3.0, 3.0]) == pytest.approx(minorant([1.0, 2.0], [[1.0, 1.0], [2.0, 2.0]])([3.0, 3.0]))
    dirac = ConicalPotential.from_minorant([4.0], [[1.0, 1.0]])
    assert dirac([2.0, 2.0]) == pytest.approx(8.0)


def test_minorant_rejects_degenerate_inputs():
    with pytest.raises(ValueError):
        ConicalPotential.from_minorant([1.0, 2.0], [[0.0, 0.0], [0.0, 0.0]])
    with pytest.raises(ValueError):
        ConicalPotential.from_minorant([-1.0, -1.0], [[1.0], [-1.0]])
    with pytest.raises(DimensionMismatchError):
        minorant([1.0], [[1.0], [2.0]])


# =============================================
# K_c
# =============================================

def test_kc_linear_cost(grid4, dirac2):
    cost = squared_distance_cost(grid4, dirac2)
    b = (2.0 - grid4.scalar_atoms()) ** 2
    assert K_c(cost, [-b[0] + 0.1], 0) == pytest.approx(0.0)
    assert K_c(cost, [-b[0] - 0.1], 0) == -math.inf


@pytest.mark.parametrize('f, expected', [(0.5, 0.375), (2.0, 0.5)])
def test_kc_quadratic(f, expected):
    cost = QuadraticF([[1.0]], [[1.0]])
    assert K_c(cost, [f], 0) == pytest.approx(expected, abs=1e-8)


def test_kc_quadratic_empty_polyhedron():
    cost = QuadraticF([[0.0]], [[1.0], [-1.0]])
    assert K_c(cost, [-1.0, -1.0], 0) == -math.inf


@pytest.mark.parametrize('f, expected', [(1.0, 0.0), (-2.0, -1.0)])
def test_kc_composite_quadratic(f, expected):
    cost = CompositeCost([[1.0]], quadratic_g(1.0))
    assert K_c(cost, [f], 0) == pytest.approx(expected)


@pytest.mark.parametrize('f, expected', [(1.0, 1.0), (0.0, -math.inf), (-1.0, -math.inf)])
def test_kc_composite_neglog(f, expected):
    cost = CompositeCost([[1.0]], neglog_g())
    assert K_c(cost, [f], 0) == pytest.approx(expected)


def test_kc_power_closed_form():
    cost = PowerF(0.5, [1.0], [[1.0]])
    assert K_c(cost, [1.0], 0) == pytest.approx(-0.25)
    assert K_c(cost, [0.0], 0) == -math.inf


def test_kc_size_mismatch():
    with pytest.raises(DimensionMismatchError):
        K_c(QuadraticF([[1.0]], [[1.0]]), [1.0, 2.0], 0)


# =============================================
# Q_F
# =============================================

def _same(a, b, tol):
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= tol * (1.0 + abs(a))


def test_qf_of_minorant_equals_kc_piecewise(rng):
    for _ in range(10):
        mu, nu = random_measure(rng, 3, 2), random_measure(rng, 3, 2)
        cost = random_piecewise_cost(rng, mu, nu)
        f = rng.uniform(0.5, 3.0, size=3)
        phi = ConicalPotential.from_minorant(f, nu.atoms)
        for i in range(3):
            assert _same(Q_F(cost, phi, i), K_c(cost, f, i), 1e-8)


def test_qf_of_minorant_equals_kc_quadratic(rng):
    X = rng.normal(size=(3, 2))
    Y = rng.uniform(0.5, 2.0, size=(4, 2))
    cost = QuadraticF(X, Y)
    f = rng.uniform(0.5, 3.0, size=4)
    phi = ConicalPotential.from_minorant(f, Y)
    for i in range(3):
        assert Q_F(cost, phi, i) == pytest.approx(K_c(cost, f, i), abs=1e-6)


def test_qf_requires_conical_cost(grid4, dirac2):
    with pytest.raises(MethodMismatchError):
        Q_F(squared_distance_cost(grid4, dirac2), ConicalPotential([[1.0]]), 0)


# =============================================
# VALOR DUAL E CERTIFICADOS
# =============================================

def test_lp_certificate_closes_gap(rng):
    mu, nu = random_measure(rng, 5, 2), random_measure(rng, 4, 2)
    cost = random_piecewise_cost(rng, mu, nu)
    report = solve_primal(cost, mu, nu)
    assert dual_value(cost, report.potential, mu, nu) == pytest.approx(report.primal_value, abs=1e-8)


def test_qp_certificate_closes_gap(rng):
    mu, nu = random_measure(rng, 4, 2, -1.0, 2.0), random_measure(rng, 3, 2)
    cost = QuadraticF(mu.atoms, nu.atoms)
    report = solve_primal(cost, mu, nu)
    assert report.certified
    assert report.dual_value == pytest.approx(report.primal_value, abs=1e-7)


def test_weak_duality_for_arbitrary_potentials(rng):
    mu, nu = random_measure(rng, 3, 1), random_measure(rng, 3, 1)
    cost = CompositeCost(rng.uniform(0.5, 2.0, size=(3, 3)), quadratic_g(1.0, -1.0))
    primal = solve_primal(cost, mu, nu).primal_value
    for _ in range(20):
        f = DualPotential(rng.normal(scale=2.0, size=3))
        assert dual_value(cost, f, mu, nu) <= primal + 1e-8


def test_dual_bound_example():
    cost = QuadraticF([[0.0]], [[1.0]])
    M, bound = dual_bound_conical(cost, DiscreteMeasure.dirac(0.0), 2.0)
    assert M == pytest.approx(2.0)
    assert bound == pytest.approx(-2.0)
    with pytest.raises(ValueError):
        dual_bound_conical(cost, DiscreteMeasure.dirac(0.0), 1.0)


def test_dual_report_for_power_cost():
    mu = DiscreteMeasure.midpoint_grid(20)
    cost = PowerF(0.5, mu.scalar_atoms(), mu.atoms)
    report = solve_primal(cost, mu, mu)
    dr = dual_report(cost, report.potential, mu, mu)
    assert dr.dual_value == pytest.approx(report.primal_value, abs=1e-10)
    assert len(dr.per_x) == 20
    assert dr.bound_M <= 0
    assert dr.lower_bound == pytest.approx(-dr.bound_M)
    assert dr.potential_min > 0


def test_nonpositive_conical_dual_check():
    mu = DiscreteMeasure.midpoint_grid(10)
    cost = PowerF(0.5, mu.scalar_atoms(), mu.atoms)
    report = solve_primal(cost, mu, mu)
    phi = ConicalPotential.from_minorant(report.potential, cost.Y)
    check = check_nonpositive_conical_dual(cost, phi, mu, mu, primal_value=report.primal_value)
    assert check.passed
    assert check.min_on_generators >= 0
    off = check_nonpositive_conical_dual(cost, phi, mu, mu, report.primal_value + 1.0)
    assert not off.passed
    assert off.gap == pytest.approx(check.gap + 1.0)


@pytest.mark.parametrize('n,m', [(5, 4), (12, 7), (30, 30)])
def test_monotone_sign_flips_with_exponential_cost(rng, n, m):
    mu = DiscreteMeasure(rng.uniform(0.0, 2.0, size=(n, 1)), rng.dirichlet(np.ones(n)))
    nu = DiscreteMeasure(rng.uniform(0.0, 2.0, size=(m, 1)), rng.dirichlet(np.ones(m)))
    xy = np.outer(mu.scalar_atoms(), nu.scalar_atoms())
    decreasing = solve_primal(CompositeCost(np.exp(-xy), quadratic_g(1.0)), mu, nu)
    increasing = solve_primal(CompositeCost(np.exp(xy), quadratic_g(1.0)), mu, nu)
    for report in (decreasing, increasing):
        assert report.dual_value <= report.primal_value + 1e-9
    assert monotone_support_check(decreasing.plan, mu, '+')
    assert not monotone_support_check(decreasing.plan, mu, '-')
    assert monotone_support_check(increasing.plan, mu, '-')
    assert not monotone_support_check(increasing.plan, mu, '+')


def test_optimality_conditions_on_composite_solution(grid4, dirac2):
    cost = CompositeCost(np.abs(2.0 - grid4.scalar_atoms())[:, None], quadratic_g(1.0))
    report = solve_primal(cost, grid4, dirac2)
    check = optimality_conditions_GF(report.plan, report.potential, cost, grid4)
    assert check.passed, check.violations
    shifted = report.potential.shifted(0, -1.0)
    assert not optimality_conditions_GF(report.plan, shifted, cost, grid4).passed


def test_optimality_conditions_require_composite(grid4, dirac2):
    cost = QuadraticF(grid4.atoms, dirac2.atoms)
    plan = solve_primal(cost, grid4, dirac2).plan
    with pytest.raises(MethodMismatchError):
        optimality_conditions_GF(plan, [0.0], cost, grid4)


def test_potential_files_round_trip(tmp_path):
    f = DualPotential([0.1, -2.5, 1e-17])
    write_potential_csv(tmp_path / 'f.csv', f)
    assert_allclose(read_potential_csv(tmp_path / 'f.csv').f, f.f, rtol=0, atol=0)
    phi = ConicalPotential([[1.0, 0.25], [-0.5, 3.0]])
    write_directions(tmp_path / 'u.csv', phi)
    assert_allclose(read_directions(tmp_path / 'u.csv').directions, phi.directions, rtol=0, atol=0)
