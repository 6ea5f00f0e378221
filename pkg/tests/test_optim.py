import numpy as np
import pytest
from numpy.testing import assert_allclose

from optim import LinearProgram, LpStatus, fw_minimize, project_onto_polytope, solve_lp, \
    solve_nnls_eq


def test_lp_optimal_with_duals():
    lp = LinearProgram(c=[-1.0, -1.0], A_ub=[[1.0, 1.0]], b_ub=[1.0])
    sol = solve_lp(lp)
    assert sol.is_optimal
    assert sol.objective == pytest.approx(-1.0)
    assert np.all(sol.y_ub <= 1e-12)
    assert sol.dual_objective(lp) == pytest.approx(sol.objective)


def test_lp_infeasible_returns_farkas_ray():
    lp = LinearProgram(c=[1.0], A_eq=[[1.0]], b_eq=[-1.0])
    sol = solve_lp(lp)
    assert sol.status == LpStatus.INFEASIBLE
    assert float(lp.b_eq @ sol.farkas_eq) > 0
    assert np.all(lp.A_eq.T @ sol.farkas_eq <= 1e-9)


def test_lp_farkas_certificate_on_inconsistent_system():
    lp = LinearProgram(c=[0.0, 0.0], A_eq=[[1.0, 1.0], [1.0, -1.0]], b_eq=[1.0, 3.0])
    sol = solve_lp(lp)
    assert sol.status == LpStatus.INFEASIBLE
    assert np.all(lp.A_eq.T @ sol.farkas_eq <= 1e-9)
    assert float(lp.b_eq @ sol.farkas_eq) > 1e-9


def test_lp_lower_bound():
    sol = solve_lp(LinearProgram(c=[1.0], A_ub=[[-1.0]], b_ub=[-3.0]))
    assert sol.is_optimal
    assert sol.objective == pytest.approx(3.0)


def test_lp_unbounded():
    sol = solve_lp(LinearProgram(c=[-1.0, 0.0], A_eq=[[1.0, -1.0]], b_eq=[0.0]))
    assert sol.status == LpStatus.UNBOUNDED
    assert sol.objective == -np.inf


def test_lp_free_variable():
    sol = solve_lp(LinearProgram(c=[1.0], A_ub=[[-1.0]], b_ub=[2.0], free=[True]))
    assert sol.is_optimal
    assert sol.x[0] == pytest.approx(-2.0)


def test_lp_degenerate_instance_terminates():
    # exemplo clássico que cicla com a regra de Dantzig
    c = [-0.75, 150.0, -0.02, 6.0]
    A = [[0.25, -60.0, -0.04, 9.0], [0.5, -90.0, -0.02, 3.0], [0.0, 0.0, 1.0, 0.0]]
    sol = solve_lp(LinearProgram(c=c, A_ub=A, b_ub=[0.0, 0.0, 1.0]))
    assert sol.is_optimal
    assert sol.objective == pytest.approx(-0.05)


def test_lp_is_deterministic():
    lp = LinearProgram(c=[1.0, 2.0, 0.5], A_eq=[[1.0, 1.0, 1.0]], b_eq=[1.0])
    first, second = solve_lp(lp), solve_lp(lp)
    assert_allclose(first.x, second.x)
    assert first.pivots == second.pivots


def test_nnls_eq_interior_solution_and_multiplier():
    sol = solve_nnls_eq(np.eye(2), [1.0, 1.0], [[1.0, 1.0]], [1.0])
    assert sol.status == LpStatus.OPTIMAL
    assert_allclose(sol.x, [0.5, 0.5], atol=1e-8)
    assert_allclose(sol.y_eq, [0.5], atol=1e-6)


def test_nnls_eq_active_bound():
    sol = solve_nnls_eq(np.eye(2), [1.0, -1.0], [[1.0, 1.0]], [1.0])
    assert_allclose(sol.x, [1.0, 0.0], atol=1e-8)
    assert sol.objective == pytest.approx(0.5)


def test_fw_minimize_weighted_quadratic():
    mu = np.array([0.5, 0.5])
    nu = np.array([1.0])
    a = np.array([1.0, 3.0])
    value = lambda Q: float(np.sum(mu * a * Q[:, 0] ** 2))
    grad = lambda Q: (2.0 * mu * a * Q[:, 0])[:, None]
    state = fw_minimize(grad, value, mu, nu, max_iters=500, gap_tol=1e-12, line_search=True)
    assert_allclose(state.Q[:, 0], [1.5, 0.5], atol=1e-5)
    assert state.value == pytest.approx(1.5, abs=1e-8)
    assert mu @ state.Q[:, 0] == pytest.approx(1.0)


def test_fw_minimize_single_row_is_the_feasible_point():
    mu = np.array([0.5])
    nu = np.array([0.2, 0.3])
    value = lambda Q: float(np.sum(Q ** 2))
    grad = lambda Q: 2.0 * Q
    state = fw_minimize(grad, value, mu, nu, max_iters=10, gap_tol=1e-12)
    assert_allclose(state.Q, [[0.4, 0.6]], atol=1e-15)
    assert state.gap == pytest.approx(0.0, abs=1e-15)
    assert state.iterations <= 1


def test_fw_minimize_constant_objective_stops_at_once():
    mu = np.array([0.25, 0.75])
    nu = np.array([0.5, 0.5])
    state = fw_minimize(lambda Q: np.zeros_like(Q), lambda Q: 7.0, mu, nu, max_iters=50)
    assert state.gap == 0.0
    assert state.iterations == 0
    assert_allclose(mu @ state.Q, nu, atol=1e-15)


def test_project_onto_polytope_small_examples():
    assert_allclose(project_onto_polytope([[0.0, 0.0]], [3.0, 4.0]), [0.0, 0.0], atol=1e-9)
    segment = [[0.0, 0.0], [2.0, 0.0]]
    assert_allclose(project_onto_polytope(segment, [1.0, 5.0]), [1.0, 0.0], atol=1e-7)
    triangle = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
    p = project_onto_polytope(triangle, [1.0, 1.0])
    assert_allclose(p, [0.5, 0.5], atol=1e-7)
    assert_allclose(project_onto_polytope(triangle, p), p, atol=1e-7)


def test_project_onto_polytope_square():
    square = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]
    assert_allclose(project_onto_polytope(square, [2.0, 0.5]), [1.0, 0.5], atol=1e-7)
    assert_allclose(project_onto_polytope(square, [0.3, 0.4]), [0.3, 0.4], atol=1e-7)
