"""Minimum total transmit power under per-user ABG performance targets.

A target ``eta_i`` on the ABG curve is equivalent to a linear-SINR
threshold ``c_i``, which in turn is a linear constraint on the powers::

    p_i |g_i|^2 >= c_i (sum_{j != i} p_j |g_i|^2 + sigma_i^2)

so the allocation is the LP ``min sum(p)`` over those constraints and
``p >= 0``.
"""

from dataclasses import dataclass, field

import numpy as np

from .abg import required_sinr
from .errors import InvalidInputError, SolverError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
CONSTRAINT_RTOL = 1e-8


@dataclass
class PowerProblem:
    thresholds: np.ndarray  # c_i, linear SINR
    gains_sq: np.ndarray  # |g_i|^2
    noise_vars: np.ndarray  # sigma_i^2

    def __post_init__(self):
        self.thresholds = np.atleast_1d(np.asarray(self.thresholds, dtype=np.float64))
        self.gains_sq = np.atleast_1d(np.asarray(self.gains_sq, dtype=np.float64))
        self.noise_vars = np.atleast_1d(np.asarray(self.noise_vars, dtype=np.float64))
        n = self.thresholds.size
        if n < 1 or self.gains_sq.shape != (n,) or self.noise_vars.shape != (n,):
            raise InvalidInputError("thresholds, gains_sq and noise_vars must be matching 1-D arrays")
        if np.any(self.thresholds < 0) or np.any(self.gains_sq <= 0) or np.any(self.noise_vars <= 0):
            raise InvalidInputError("need thresholds >= 0, gains_sq > 0, noise_vars > 0")

    @property
    def n_users(self):
        return self.thresholds.size

    def constraint_matrix(self):
        """``A p >= b`` with each row divided by ``|g_i|^2``."""
        c = self.thresholds
        a = -np.outer(c, np.ones(self.n_users))
        np.fill_diagonal(a, 1.0)
        b = c * self.noise_vars / self.gains_sq
        return a, b

    def satisfied(self, powers, rtol=CONSTRAINT_RTOL):
        """Per-user check of the SINR constraints at ``powers``."""
        p = np.asarray(powers, dtype=np.float64)
        lhs = p * self.gains_sq
        rhs = self.thresholds * ((p.sum() - p) * self.gains_sq + self.noise_vars)
        return lhs >= rhs * (1.0 - rtol)


@dataclass
class PowerSolution:
    status: str
    powers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    total: float = float("nan")

    @property
    def optimal(self):
        return self.status == OPTIMAL

    def to_dict(self):
        return {
            "status": self.status,
            "powers": [float(p) for p in self.powers],
            "total": float(self.total) if self.optimal else None,
        }


def build_problem(abg_params, etas, gains_sq, noise_vars):
    thresholds = [required_sinr(p, eta) for p, eta in zip(abg_params, etas)]
    if len(thresholds) != len(abg_params):
        raise InvalidInputError("one target per user is required")
    return PowerProblem(thresholds, gains_sq, noise_vars)


# ---------------------------------------------------------------------------
# two-phase simplex, Bland's rule
# ---------------------------------------------------------------------------


def _pivot(tab, row, col):
    tab[row] /= tab[row, col]
    for r in range(tab.shape[0]):
        if r != row and tab[r, col] != 0.0:
            tab[r] -= tab[r, col] * tab[row]


def _run_simplex(tab, basis, n_cols, tol, max_iter):
    """Minimize the objective in the last row over columns ``< n_cols``."""
    m = tab.shape[0] - 1
    for _ in range(max_iter):
        obj = tab[-1, :n_cols]
        entering = np.flatnonzero(obj < -tol)
        if entering.size == 0:
            return
        col = int(entering[0])
        column = tab[:m, col]
        ok = column > tol
        if not np.any(ok):
            raise SolverError("LP is unbounded")
        ratios = np.full(m, np.inf)
        ratios[ok] = tab[:m, -1][ok] / column[ok]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + tol * max(1.0, abs(best)))
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(tab, row, col)
        basis[row] = col
    raise SolverError("simplex iteration limit exceeded")


def simplex_lp(cost, a_ge, b, tol=1e-11, max_iter=10_000):
    """Solve ``min cost @ x`` s.t. ``a_ge @ x >= b``, ``x >= 0``, ``b >= 0``.

    Returns ``x`` or ``None`` when infeasible.
    """
    a_ge = np.asarray(a_ge, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m, n = a_ge.shape
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    # columns: x (n), surplus (m), artificial (m), rhs
    tab = np.zeros((m + 1, n + 2 * m + 1))
    tab[:m, :n] = a_ge
    tab[:m, n:n + m] = -np.eye(m)
    tab[:m, n + m:n + 2 * m] = np.eye(m)
    tab[:m, -1] = b
    basis = list(range(n + m, n + 2 * m))
    # phase 1 objective: sum of artificials, expressed in non-basic terms
    tab[-1, :] = -tab[:m, :].sum(axis=0)
    tab[-1, n + m:n + 2 * m] = 0.0
    _run_simplex(tab, basis, n + 2 * m, tol, max_iter)
    if -tab[-1, -1] > 1e-9 * scale:
        return None
    # drive zero-valued artificials out of the basis
    for r, var in enumerate(basis):
        if var >= n + m:
            candidates = np.flatnonzero(np.abs(tab[r, :n + m]) > tol)
            if candidates.size:
                _pivot(tab, r, int(candidates[0]))
                basis[r] = int(candidates[0])
    keep = [r for r, var in enumerate(basis) if var < n + m]
    tab = np.vstack([tab[keep], tab[-1:]])
    tab = np.delete(tab, np.s_[n + m:n + 2 * m], axis=1)
    basis = [basis[r] for r in keep]
    # phase 2 objective
    tab[-1, :] = 0.0
    tab[-1, :n] = cost
    for r, var in enumerate(basis):
        if tab[-1, var] != 0.0:
            tab[-1] -= tab[-1, var] * tab[r]
    _run_simplex(tab, basis, n + m, tol, max_iter)
    x = np.zeros(n + m)
    x[basis] = tab[:-1, -1]
    return np.maximum(x[:n], 0.0)


def simplex_solve(problem):
    a, b = problem.constraint_matrix()
    x = simplex_lp(np.ones(problem.n_users), a, b)
    if x is None:
        return PowerSolution(INFEASIBLE)
    return PowerSolution(OPTIMAL, x, float(x.sum()))


def direct_solve(problem):
    """Solve the constraints as equalities; optimal iff the solution is non-negative."""
    a, b = problem.constraint_matrix()
    try:
        p = np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        return PowerSolution(INFEASIBLE)
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        return PowerSolution(INFEASIBLE)
    return PowerSolution(OPTIMAL, p, float(p.sum()))


def brute_force_check(problem, lo=1e-3, hi=1e3, points=200):
    """Exhaustive scan of a log-spaced power grid (tests only, N <= 3).

    Returns ``(best_total, best_point, step_ratio)``; ``best_total`` is
    ``inf`` when no grid point is feasible. ``step_ratio`` is the ratio
    between neighbouring grid values.
    """
    n = problem.n_users
    if n > 3:
        raise InvalidInputError("brute force is limited to 3 users")
    axis = np.concatenate([[0.0], np.logspace(np.log10(lo), np.log10(hi), points)])
    mesh = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1).reshape(-1, n)
    total = mesh.sum(axis=1, keepdims=True)
    lhs = mesh * problem.gains_sq
    rhs = problem.thresholds * ((total - mesh) * problem.gains_sq + problem.noise_vars)
    feasible = np.all(lhs >= rhs * (1.0 - CONSTRAINT_RTOL), axis=1)
    ratio = (hi / lo) ** (1.0 / (points - 1))
    if not np.any(feasible):
        return float("inf"), None, ratio
    k = int(np.argmin(np.where(feasible, mesh.sum(axis=1), np.inf)))
    return float(mesh[k].sum()), mesh[k], ratio
