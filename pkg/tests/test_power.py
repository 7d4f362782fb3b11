import warnings

import numpy as np
import pytest

from sfdma.abg import TABLE_PARAMS, AbgParams, AbgWarning, required_sinr
from sfdma.errors import InfeasibleTargetError, InvalidInputError
from sfdma.power import PowerProblem, brute_force_check, build_problem, direct_solve, simplex_lp, simplex_solve


def test_single_user_closed_form():
    sol = simplex_solve(PowerProblem([2.0], [1.0], [0.5]))
    assert sol.optimal and sol.total == 1.0
    np.testing.assert_array_equal(sol.powers, [1.0])
    assert direct_solve(PowerProblem([2.0], [1.0], [0.5])).total == 1.0


def test_two_user_symmetric():
    sol = simplex_solve(PowerProblem([0.5, 0.5], [1.0, 1.0], [1.0, 1.0]))
    np.testing.assert_allclose(sol.powers, [1.0, 1.0], rtol=1e-12)


def test_two_user_infeasible_all_methods():
    prob = PowerProblem([1.0, 1.0], [1.0, 1.0], [1.0, 1.0])
    assert not simplex_solve(prob).optimal
    assert not direct_solve(prob).optimal
    best, point, _ = brute_force_check(prob, lo=1e-3, hi=100.0, points=300)
    assert best == np.inf and point is None


def test_build_problem_single_and_symmetric():
    prob = build_problem([TABLE_PARAMS], [92.0], [1.0], [1.0])
    assert prob.thresholds[0] == pytest.approx(required_sinr(TABLE_PARAMS, 92.0))
    a, b = prob.constraint_matrix()
    np.testing.assert_array_equal(a, [[1.0]])
    pair = build_problem([TABLE_PARAMS] * 2, [92.0, 92.0], [1.0, 1.0], [1.0, 1.0])
    a, b = pair.constraint_matrix()
    np.testing.assert_array_equal(a, a[::-1, ::-1])
    assert b[0] == b[1]
    with pytest.raises(InfeasibleTargetError):
        build_problem([TABLE_PARAMS], [96.0], [1.0], [1.0])


def random_problem(rng, n):
    return PowerProblem(rng.uniform(0.01, 1.5, n), rng.exponential(size=n) + 1e-3,
                        rng.uniform(0.1, 2.0, n))


def test_simplex_matches_direct_random():
    rng = np.random.default_rng(0)
    statuses = set()
    for _ in range(300):
        prob = random_problem(rng, int(rng.integers(1, 4)))
        s, d = simplex_solve(prob), direct_solve(prob)
        assert s.status == d.status
        statuses.add(s.status)
        if s.optimal:
            np.testing.assert_allclose(s.powers, d.powers, rtol=1e-7)
            assert np.all(prob.satisfied(s.powers))
            # every constraint is active at the optimum
            lhs = s.powers * prob.gains_sq
            rhs = prob.thresholds * ((s.total - s.powers) * prob.gains_sq + prob.noise_vars)
            np.testing.assert_allclose(lhs, rhs, rtol=1e-6)
    assert statuses == {"optimal", "infeasible"}


def test_noise_scaling_linear():
    rng = np.random.default_rng(1)
    for _ in range(20):
        prob = random_problem(rng, 3)
        base = direct_solve(prob)
        if not base.optimal:
            continue
        scaled = direct_solve(PowerProblem(prob.thresholds, prob.gains_sq, 7.5 * prob.noise_vars))
        np.testing.assert_allclose(scaled.powers, 7.5 * base.powers, rtol=1e-12)


def test_raising_target_never_lowers_power():
    p = AbgParams(95.0, 15.7, 82.93, 1.427)
    gains = np.array([0.8, 1.7])
    prev = 0.0
    for eta in np.linspace(60, 88, 15):
        sol = simplex_solve(build_problem([p, p], [eta, 85.0], gains, [1.0, 1.0]))
        assert sol.optimal and sol.total >= prev
        prev = sol.total


def test_brute_force_single_user_within_one_step():
    prob = PowerProblem([2.0], [1.0], [0.5])
    best, point, ratio = brute_force_check(prob)
    assert 1.0 <= best <= ratio * 1.0 * (1 + 1e-12)


def test_brute_force_never_beats_lp():
    rng = np.random.default_rng(2)
    for _ in range(40):
        prob = random_problem(rng, int(rng.integers(1, 4)))
        sol = simplex_solve(prob)
        best, _, _ = brute_force_check(prob, points=60)
        if sol.optimal:
            assert best >= sol.total * (1 - 1e-9)
        else:
            assert best == np.inf


def test_zero_threshold_gives_zero_power():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AbgWarning)
        prob = build_problem([TABLE_PARAMS, TABLE_PARAMS], [5.0, 92.0], [1.0, 1.0], [1.0, 1.0])
    sol = simplex_solve(prob)
    assert sol.optimal and sol.powers[0] == 0.0


def test_generic_lp():
    # min x + 2y s.t. x + y >= 2, x - y >= -1 is not in standard form (b < 0); use x + 3y >= 3, 2x + y >= 2
    x = simplex_lp(np.array([1.0, 1.0]), np.array([[1.0, 3.0], [2.0, 1.0]]), np.array([3.0, 2.0]))
    np.testing.assert_allclose(x, [0.6, 0.8], rtol=1e-12)


def test_problem_validation_and_json():
    with pytest.raises(InvalidInputError):
        PowerProblem([1.0], [0.0], [1.0])
    with pytest.raises(InvalidInputError):
        PowerProblem([1.0, 1.0], [1.0], [1.0])
    with pytest.raises(InvalidInputError):
        brute_force_check(PowerProblem([0.1] * 4, [1.0] * 4, [1.0] * 4))
    d = simplex_solve(PowerProblem([2.0], [1.0], [0.5])).to_dict()
    assert d == {"status": "optimal", "powers": [1.0], "total": 1.0}
    assert simplex_solve(PowerProblem([1.0, 1.0], [1, 1], [1, 1])).to_dict()["total"] is None
