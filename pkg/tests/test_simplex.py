import numpy as np
import pytest
from scipy.optimize import linprog

from carbon_offload.simplex import IterationLimitError, LpProblem, LpStatus, simplex_solve

from oracles import random_feasible_lp, vertex_enumeration


def test_bound_active_optimum():
    sol = simplex_solve(LpProblem(c=[1.0]))
    assert sol.optimal and sol.objective == 0 and sol.x[0] == 0


def test_box_example():
    sol = simplex_solve(LpProblem(c=[-1, -2], a_ub=[[1, 1]], b_ub=[1], upper=[1, 1]))
    assert sol.objective == pytest.approx(-2, abs=1e-12)
    np.testing.assert_allclose(sol.x, [0, 1], atol=1e-12)


def test_single_task_assignment_row():
    sol = simplex_solve(LpProblem(c=[0.12, 0.02], a_eq=[[1, 1]], b_eq=[1], upper=[1, 1]))
    assert sol.objective == pytest.approx(0.02, abs=1e-12)
    np.testing.assert_allclose(sol.x, [0, 1], atol=1e-12)


def test_infeasible_status():
    sol = simplex_solve(LpProblem(c=[1, 1], a_ub=[[1, 1]], b_ub=[-1]))
    assert sol.status is LpStatus.INFEASIBLE and sol.x is None


def test_unbounded_status():
    sol = simplex_solve(LpProblem(c=[-1, 0], a_ub=[[0, 1]], b_ub=[1]))
    assert sol.status is LpStatus.UNBOUNDED


def test_free_and_upper_only_variables():
    # min x - y  s.t.  x >= -3 via row, y <= 2 only
    p = LpProblem(c=[1, -1], a_ub=[[-1, 0]], b_ub=[3], lower=[-np.inf, -np.inf], upper=[np.inf, 2])
    sol = simplex_solve(p)
    assert sol.objective == pytest.approx(-5)
    np.testing.assert_allclose(sol.x, [-3, 2])


def test_iteration_cap_raises():
    p = LpProblem(c=[-1, -1], a_ub=[[1, 2], [2, 1]], b_ub=[4, 4])
    with pytest.raises(IterationLimitError):
        simplex_solve(p, max_iter=0)


def test_invalid_problem_data():
    with pytest.raises(ValueError):
        LpProblem(c=[1, 1], a_ub=[[1, 1, 1]], b_ub=[1])
    with pytest.raises(ValueError):
        LpProblem(c=[1], lower=[2], upper=[1])
    with pytest.raises(ValueError):
        LpProblem(c=[np.nan])


def test_degenerate_klee_minty_style_terminates():
    # Beale's classic cycling example for textbook pivoting rules
    c = [-0.75, 150, -0.02, 6]
    a = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    sol = simplex_solve(LpProblem(c=c, a_ub=a, b_ub=[0, 0, 1]))
    assert sol.optimal
    assert sol.objective == pytest.approx(-0.05)


def test_redundant_equalities():
    p = LpProblem(c=[1, 2], a_eq=[[1, 1], [2, 2]], b_eq=[1, 2])
    sol = simplex_solve(p)
    assert sol.optimal and sol.objective == pytest.approx(1)


def test_deterministic_basis():
    rng = np.random.default_rng(7)
    p = random_feasible_lp(rng, degenerate=True)
    a, b = simplex_solve(p), simplex_solve(p)
    assert a.iterations == b.iterations
    np.testing.assert_array_equal(a.x, b.x)


def test_random_lps_against_scipy_and_vertices():
    rng = np.random.default_rng(11)
    for _ in range(200):
        p = random_feasible_lp(rng, degenerate=bool(rng.random() < 0.3))
        sol = simplex_solve(p)
        assert sol.optimal
        ref = linprog(p.c, A_ub=p.a_ub if p.a_ub.size else None, b_ub=p.b_ub if p.a_ub.size else None,
                      A_eq=p.a_eq if p.a_eq.size else None, b_eq=p.b_eq if p.a_eq.size else None,
                      bounds=list(zip(p.lower, p.upper)), method="highs")
        assert ref.status == 0
        assert sol.objective == pytest.approx(ref.fun, abs=1e-6)
        best, _ = vertex_enumeration(p)
        assert sol.objective == pytest.approx(best, abs=1e-6)
        assert max(p.residuals(sol.x)) <= 1e-9


def test_weak_duality_on_standard_form():
    rng = np.random.default_rng(3)
    for _ in range(200):
        p = random_feasible_lp(rng, degenerate=bool(rng.random() < 0.3))
        sol = simplex_solve(p)
        sf, y = sol.standard_form, sol.dual
        z = np.linalg.lstsq(sf.d, sol.x - sf.x0, rcond=None)[0]
        slack = sf.b[: sf.n_ub_rows] - sf.a[: sf.n_ub_rows, : sf.n_struct] @ z
        primal = float(sf.c[: sf.n_struct] @ z)
        # dual feasibility within tolerance, then b.y <= c.z
        reduced = sf.c - sf.a.T @ y
        assert reduced.min() >= -1e-7 * max(1.0, np.abs(sf.c).max())
        assert float(sf.b @ y) <= primal + 1e-7 * max(1.0, abs(primal))
        assert slack.min() >= -1e-9
