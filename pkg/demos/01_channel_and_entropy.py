"""
Superposed BPSK codes over a fading broadcast channel
=====================================================

Two users share one channel use. Each receiver divides by its own gain and
sees the sum of both codes plus scaled noise. The entropy terms of the
training loss are computed from exactly this mixture.
"""

import numpy as np

from sfdma.channel import ChannelRealization, broadcast, equalize, sample_rayleigh, sinr
from sfdma.rib import entropy_y_given_s, entropy_y_given_x, gaussian_entropy, mixture_entropy_mc, sign_mixture

rng = np.random.default_rng(0)

# two 8-symbol codes, one fade per user, unit powers, noise at 0 dB
codes = np.where(rng.random((2, 8)) < 0.5, -1.0, 1.0)
gains = sample_rayleigh(2, rng)
link = ChannelRealization(gains, noise_vars=[1.0, 1.0], powers=[1.0, 1.0])

y = broadcast(codes, link, user=0, rng=rng)
print("user 1 code     ", codes[0])
print("equalized y     ", np.round(equalize(y, gains[0]), 2))
print("SINR per user   ", [round(sinr(link, u), 3) for u in range(2)])

# %%
# Per dimension, the equalized sample is a Gaussian mixture. Knowing the own
# symbol removes one binary choice, so H(Y|x) <= H(Y|s).
p_other = np.array([0.8])
p_own = np.array([0.3])
var = 1.0 / gains[0] ** 2
hx = entropy_y_given_x([p_other], [1.0], 1.0, var, dim=0)
hs = entropy_y_given_s(p_own, [p_other], [1.0], 1.0, var, dim=0)
print(f"noise entropy {gaussian_entropy(var):.4f}  H(Y|x) {hx:.4f}  H(Y|s) {hs:.4f}")

# an independent Monte-Carlo check of the quadrature
means, w, _ = sign_mixture(np.array([1.0, 1.0]), [p_own, p_other])
est, se = mixture_entropy_mc(means, w[0], var, 10**6, rng)
print(f"Monte-Carlo H(Y|s) {est:.4f} +/- {se:.4f}")
