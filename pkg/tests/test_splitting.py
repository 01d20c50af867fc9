import numpy as np
import pytest

from ccopt.splitting import (INFEASIBLE, OPTIMAL, UNBOUNDED, SolverConfig, halfspace_feasibility, qp_residuals,
                             solve_qp, verify_recession)


def test_box_projection_matches_clip():
    rng = np.random.default_rng(0)
    for _ in range(30):
        n = int(rng.integers(1, 7))
        v = 3 * rng.standard_normal(n)
        lo, hi = -rng.random(n), rng.random(n)
        res = solve_qp(np.eye(n), -v, np.eye(n), lo, hi)
        assert res.status == OPTIMAL
        np.testing.assert_allclose(res.x, np.clip(v, lo, hi), atol=1e-9)


def test_equality_least_squares_matches_kkt_solve():
    rng = np.random.default_rng(1)
    for _ in range(30):
        n = int(rng.integers(2, 7))
        p = int(rng.integers(1, n))
        M, a = rng.standard_normal((n + 2, n)), rng.standard_normal(n + 2)
        E, e = rng.standard_normal((p, n)), rng.standard_normal(p)
        K = np.block([[M.T @ M, E.T], [E, np.zeros((p, p))]])
        expected = np.linalg.solve(K, np.r_[M.T @ a, e])[:n]
        res = solve_qp(M.T @ M, -M.T @ a, E, e, e)
        np.testing.assert_allclose(res.x, expected, atol=1e-8)
        assert max(qp_residuals(M.T @ M, -M.T @ a, E, e, e, res.x, res.y)) <= 1e-7 * (1 + np.abs(a).max())


def test_unbounded_ray_is_certified():
    # min -z1 - z2 subject to z1 = z2, z >= 0
    C = np.array([[1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    lo, hi = np.zeros(3), np.array([0.0, np.inf, np.inf])
    res = solve_qp(np.zeros((2, 2)), -np.ones(2), C, lo, hi)
    assert res.status == UNBOUNDED
    d = res.direction
    assert d[0] == pytest.approx(d[1]) and d[0] > 0
    assert verify_recession(np.zeros((2, 2)), -np.ones(2), C, lo, hi, res.x, d, 1e-9)


def test_infeasible_box_has_farkas_vector():
    res = solve_qp(np.eye(1), np.zeros(1), np.array([[1.0], [1.0]]), [1.0, -np.inf], [np.inf, 0.0])
    assert res.status == INFEASIBLE
    y = res.farkas
    assert np.allclose(np.array([[1.0], [1.0]]).T @ y, 0.0)


def test_halfspace_examples():
    assert halfspace_feasibility([[-1.0], [1.0]], [-1.0, 2.0]).point == pytest.approx([1.5])
    res = halfspace_feasibility([[-1.0], [1.0]], [-1.0, 0.0])
    assert not res.feasible
    y = res.farkas
    assert np.all(y >= 0) and np.allclose(np.array([-1.0, 1.0]) @ y, 0) and np.array([-1.0, 0.0]) @ y < 0


def test_budget_exhaustion_is_reported():
    from ccopt.certificate import IndeterminateError

    rng = np.random.default_rng(2)
    M = rng.standard_normal((30, 20))
    with pytest.raises(IndeterminateError):
        solve_qp(M.T @ M, rng.standard_normal(20), M, -np.ones(30), np.ones(30), SolverConfig(max_iter=3))
