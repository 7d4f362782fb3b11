"""
From measured accuracy to minimum transmit power
================================================

Fit the saturating accuracy-versus-SINR curve, turn an accuracy target into
an SINR threshold, then find the smallest total power that meets every
user's threshold on one fading draw.
"""

import numpy as np

from sfdma.abg import TABLE_PARAMS, abg_eval, abg_fit, required_sinr
from sfdma.power import brute_force_check, build_problem, direct_solve, simplex_solve

rng = np.random.default_rng(3)

# noisy accuracy measurements along a log-spaced SINR grid
sinr = np.logspace(-2, 2, 20)
measured = abg_eval(TABLE_PARAMS, sinr) + rng.normal(0, 0.5, sinr.size)
fit = abg_fit(sinr, measured)
print("fitted", {k: round(v, 3) for k, v in fit.params.to_dict().items()},
      f"rms {fit.residual_rms:.3f}")

# %%
# A 92% target needs a linear SINR of about 0.64
c = required_sinr(TABLE_PARAMS, 92.0)
print(f"threshold for 92%: {c:.5f} (check: {abg_eval(TABLE_PARAMS, c):.6f})")

# %%
# Two users on one fading draw; the LP, the equality system and a grid scan agree
gains_sq = rng.exponential(size=2)
problem = build_problem([TABLE_PARAMS, TABLE_PARAMS], [92.0, 90.0], gains_sq, [1.0, 1.0])
lp = simplex_solve(problem)
eq = direct_solve(problem)
grid_total, _, step = brute_force_check(problem, points=400)
print("gains^2", np.round(gains_sq, 3))
print("simplex", lp.status, np.round(lp.powers, 5), round(lp.total, 5))
print("direct ", eq.status, np.round(eq.powers, 5))
print(f"best grid point total {grid_total:.5f} (grid ratio {step:.4f})")
