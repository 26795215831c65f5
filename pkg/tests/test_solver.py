import numpy as np
import pytest
from conftest import ACCEPTANCE_SEED, L0

from sviconf.box import BoxSet, project
from sviconf.harness import Problem, replicate
from sviconf.model import SaaMap, ten_dim_example, true_map, two_dim_example
from sviconf.solver import (
    DimensionTooLarge,
    MaxIterations,
    SingularNewtonMatrix,
    SolverConfig,
    normal_map_eval,
    solve,
    solve_bruteforce,
)


def test_normal_map_examples(orthant2):
    f = SaaMap(L0, [3.0, -1.0])
    np.testing.assert_allclose(normal_map_eval(f, orthant2, [1, 2]), f([1, 2]))
    np.testing.assert_array_equal(normal_map_eval(true_map(two_dim_example()), orthant2, [0, 0]), [0, 0])
    ident = SaaMap(np.eye(2), np.zeros(2))
    np.testing.assert_array_equal(normal_map_eval(ident, orthant2, [-1, 2]), [-1, 2])


def test_solve_true_problem(orthant2):
    res = solve(true_map(two_dim_example()), orthant2, z_init=[1, 1])
    np.testing.assert_array_equal(res.z, [0, 0])
    assert res.residual <= 1e-10


def test_solve_interior(orthant2):
    f = SaaMap(L0, [-1.0, -2.0])
    res = solve(f, orthant2)
    np.testing.assert_allclose(res.x, [2 / 3, 2 / 3], atol=1e-12)
    np.testing.assert_allclose(res.z, res.x, atol=1e-12)
    assert res.is_cell_interior


def test_solve_reference_instance(orthant2, saa10):
    res = solve(saa10, orthant2)
    np.testing.assert_allclose(res.x, [0.0782, 0.1097], atol=5e-4)
    np.testing.assert_allclose(res.z, res.x)


def test_bruteforce_examples(orthant2):
    sols = solve_bruteforce(true_map(two_dim_example()), orthant2)
    assert len(sols) == 1 and np.array_equal(sols[0].x, [0, 0])
    sols = solve_bruteforce(SaaMap(L0, [-1.0, -2.0]), orthant2)
    assert len(sols) == 1
    np.testing.assert_allclose(sols[0].x, [2 / 3, 2 / 3])
    sols = solve_bruteforce(SaaMap(np.eye(2), [1.0, 1.0]), orthant2)
    assert len(sols) == 1
    np.testing.assert_array_equal(sols[0].x, [0, 0])
    np.testing.assert_array_equal(sols[0].z, [-1, -1])
    with pytest.raises(DimensionTooLarge):
        solve_bruteforce(SaaMap(np.eye(15), np.zeros(15)), BoxSet.nonnegative_orthant(15))


def test_bruteforce_reports_multiple_solutions(orthant2):
    # -I is not monotone: x = 0 and x = (1, 0), (0, 1), (1, 1) all solve 0 in -x + (1,1) + N(x)
    sols = solve_bruteforce(SaaMap(-np.eye(2), [1.0, 1.0]), orthant2)
    assert sorted(tuple(s.x) for s in sols) == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_singular_newton_matrix(orthant2):
    f = SaaMap(np.zeros((2, 2)), [-1.0, -1.0])
    with pytest.raises(SingularNewtonMatrix):
        solve(f, orthant2, z_init=[1.0, 1.0])


def test_max_iterations(orthant2):
    with pytest.raises(MaxIterations):
        solve(SaaMap(L0, [-1.0, -2.0]), orthant2, SolverConfig(max_iter=0), z_init=[5.0, -3.0])


def random_monotone_instance(rng):
    q = int(rng.integers(2, 7))
    B = rng.normal(size=(q, q))
    J = (B - B.T) + 0.5 * B.T @ B + np.eye(q) * rng.uniform(0.1, 1.0)
    b = rng.normal(size=q) * 2
    lo = np.where(rng.random(q) < 0.7, rng.uniform(-1, 0, q), -np.inf)
    up = np.where(rng.random(q) < 0.5, lo + rng.uniform(0.2, 2, q), np.inf)
    up = np.where(np.isinf(lo) & np.isinf(up), rng.uniform(0, 1, q), up)
    return SaaMap(J, b), BoxSet(lo, up)


def check_certificates(f, S, res, tol=1e-10):
    # residual recomputed outside the solver loop
    assert np.linalg.norm(normal_map_eval(f, S, res.z)) <= tol
    x = project(S, res.z)
    v = res.z - x  # must lie in the normal cone at x
    at_lo = np.isclose(x, S.lower)
    at_up = np.isclose(x, S.upper)
    free = ~(at_lo | at_up)
    assert np.all(np.abs(v[free]) <= 1e-9)
    assert np.all(v[at_lo & ~at_up] <= 1e-9)
    assert np.all(v[at_up & ~at_lo] >= -1e-9)
    np.testing.assert_allclose(f(x) + v, 0, atol=1e-9)
    np.testing.assert_allclose(res.z, x - f(x), atol=1e-9)


def test_newton_matches_bruteforce_oracle():
    rng = np.random.default_rng(6)
    for _ in range(500):
        f, S = random_monotone_instance(rng)
        res = solve(f, S)
        oracle = solve_bruteforce(f, S)
        assert len(oracle) == 1
        np.testing.assert_allclose(res.x, oracle[0].x, atol=1e-8)
        np.testing.assert_allclose(res.z, oracle[0].z, atol=1e-8)
        check_certificates(f, S, res)


@pytest.mark.parametrize("model, n", [(two_dim_example(), 10), (two_dim_example(), 30), (ten_dim_example(1), 50)])
def test_finite_termination_on_model_draws(model, n):
    S = BoxSet.nonnegative_orthant(model.q)
    prob = Problem(model, S, np.zeros(model.q), (0.1,), ACCEPTANCE_SEED, None, 0.0)
    iters = [replicate(prob, n, r).iterations for r in range(100)]
    assert max(iters) <= 30
