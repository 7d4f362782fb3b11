"""Robust information bottleneck loss for binarized multi-user codes.

Per user ``i`` and code dimension ``j`` the equalized received sample is a
Gaussian mixture: component means are the power-weighted sums of every
user's BPSK symbol, weighted by the Bernoulli laws of the symbols that are
not conditioned on, and the common variance is ``sigma_i^2 / |g_i|^2``.
Two conditional entropies of that mixture enter the loss:

* ``H(Y_ij | x)``: the user's own symbol is known, interferers are
  marginalized. Entropy is shift invariant, so the own symbol's value only
  moves the mixture and does not change the result.
* ``H(Y_ij | s_i)``: the own symbol is marginalized as well.

Both are 1-D integrals evaluated with a trapezoid rule refined until two
successive resolutions agree. Derivatives with respect to the mixture
weights come from the same quadrature, ``dH/dw_k = -int phi_k (log f + 1)``.
"""

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import nn
from .channel import as_rng
from .errors import IntegrationError, InvalidInputError
from .signal import binarize, ste_backward

ENVELOPE_SIGMAS = 8.0
DEFAULT_TOL = 1e-6
MAX_POINTS = 1 << 20
PROB_FLOOR = 1e-12


def bernoulli_from_features(a):
    """P(x = +1 | s) for each dimension: ``(1 + a) / 2``.

    ``a`` comes from a tanh layer; the closed interval [-1, 1] is accepted
    because tanh saturates to exactly +-1.0 in float64.
    """
    a = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(a)) or np.any(np.abs(a) > 1.0):
        raise InvalidInputError("features must lie in [-1, 1] to define a Bernoulli law")
    return 0.5 * (1.0 + a)


def cross_entropy_term(probs, label):
    """``-log probs[label]`` with the probability floored at 1e-12."""
    probs = np.asarray(probs, dtype=np.float64)
    if (
        probs.ndim != 1
        or np.any(probs < 0)
        or not np.isclose(probs.sum(), 1.0, rtol=0, atol=1e-9)
    ):
        raise InvalidInputError("decoder output is not a probability vector")
    if not 0 <= label < probs.size:
        raise InvalidInputError(f"label {label} out of range for {probs.size} classes")
    return float(-np.log(max(probs[label], PROB_FLOOR)))


def gaussian_entropy(var):
    return 0.5 * np.log(2.0 * np.pi * np.e * var)


# ---------------------------------------------------------------------------
# mixture entropy by quadrature
# ---------------------------------------------------------------------------


def _quadrature(means, weights, var, n_intervals, lo, hi):
    y = np.linspace(lo, hi, n_intervals + 1)
    step = (hi - lo) / n_intervals
    tw = np.full(y.size, step)
    tw[[0, -1]] *= 0.5
    logphi = -0.5 * (y[None, :] - means[:, None]) ** 2 / var - 0.5 * np.log(2.0 * np.pi * var)
    # (B, K, n) via log-sum-exp so far-apart components never produce log(0)
    # zero-weight components (symbols with P(+1) of exactly 0 or 1) drop out as -inf
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    logf = logsumexp(logphi[None, :, :] + logw[:, :, None], axis=1)
    f = np.exp(logf)
    h = -(f * logf) @ tw
    dh_dw = -((logf + 1.0) @ (np.exp(logphi) * tw).T)
    return h, dh_dw


def mixture_entropy(means, weights, var, tol=DEFAULT_TOL, resolution=1, return_grad=False):
    """Differential entropy (nats) of equal-variance Gaussian mixtures.

    Parameters
    ----------
    means : (K,) array
        Component means, shared by every mixture in the batch.
    weights : (..., K) array
        Mixture weights; each row sums to one.
    var : float
        Common component variance.
    tol : float
        Absolute tolerance between successive trapezoid refinements.
    resolution : int
        Multiplier on the starting number of intervals.
    return_grad : bool
        Also return ``dH/dweights`` with the shape of ``weights``.
    """
    means = np.asarray(means, dtype=np.float64).reshape(-1)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape[-1] != means.size:
        raise InvalidInputError("weights' last axis must match the number of components")
    if not var > 0:
        raise InvalidInputError("component variance must be positive")
    batch_shape = weights.shape[:-1]
    w = weights.reshape(-1, means.size)
    sigma = np.sqrt(var)
    lo = means.min() - ENVELOPE_SIGMAS * sigma
    hi = means.max() + ENVELOPE_SIGMAS * sigma
    n = max(int(np.ceil((hi - lo) / sigma)), 16) * int(resolution)
    h_prev, _ = _quadrature(means, w, var, n, lo, hi)
    while True:
        n *= 2
        if n + 1 > MAX_POINTS:
            raise IntegrationError(f"trapezoid rule did not reach tol={tol} within {MAX_POINTS} points")
        h, grad = _quadrature(means, w, var, n, lo, hi)
        if np.max(np.abs(h - h_prev)) < tol:
            break
        h_prev = h
    h = h.reshape(batch_shape)
    if return_grad:
        return h, grad.reshape(weights.shape)
    return h


def mixture_entropy_mc(means, weights, var, n_samples, rng):
    """Monte-Carlo entropy estimate ``-mean(log f(Y))`` and its standard error.

    Independent of the quadrature path: draws components by weight, samples
    the Gaussian and evaluates the log-density directly.
    """
    rng = as_rng(rng)
    means = np.asarray(means, dtype=np.float64).reshape(-1)
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    comp = rng.choice(means.size, size=n_samples, p=weights / weights.sum())
    y = means[comp] + rng.normal(0.0, np.sqrt(var), size=n_samples)
    dens = np.zeros(n_samples)
    for mu, wk in zip(means, weights):
        dens += wk * np.exp(-0.5 * (y - mu) ** 2 / var)
    logf = np.log(dens) - 0.5 * np.log(2.0 * np.pi * var)
    return float(-logf.mean()), float(logf.std(ddof=1) / np.sqrt(n_samples))


# ---------------------------------------------------------------------------
# Bernoulli sign-pattern mixtures
# ---------------------------------------------------------------------------


def sign_mixture(amplitudes, probs):
    """Enumerate the sign patterns of independent BPSK symbols.

    ``amplitudes`` are per-symbol sqrt-powers, ``probs`` the matching
    P(+1) arrays (common shape ``S``). Returns ``means (K,)``,
    ``weights (*S, K)`` and ``dweights (len(probs), *S, K)``, the derivative
    of each weight with respect to each symbol's P(+1).
    """
    probs = [np.asarray(p, dtype=np.float64) for p in probs]
    shape = np.broadcast_shapes(*(p.shape for p in probs)) if probs else ()
    patterns = list(itertools.product((1.0, -1.0), repeat=len(probs)))
    means = np.array([np.dot(pat, amplitudes) for pat in patterns]) if probs else np.zeros(1)
    factors = [np.stack([p, 1.0 - p], axis=-1) for p in probs]  # (*S, 2)
    weights = np.ones(shape + (len(patterns),))
    dweights = np.zeros((len(probs),) + shape + (len(patterns),))
    for k, pat in enumerate(patterns):
        picks = [factors[u][..., 0 if s > 0 else 1] for u, s in enumerate(pat)]
        weights[..., k] = np.prod(picks, axis=0) if picks else 1.0
        for u, s in enumerate(pat):
            others = [picks[v] for v in range(len(pat)) if v != u]
            dweights[u, ..., k] = s * (np.prod(others, axis=0) if others else 1.0)
    return means, weights, dweights


def _entropy_with_grads(own_power, own_prob, interferer_powers, interferer_probs, var, tol,
                        resolution, shape=()):
    amps = [np.sqrt(p) for p in interferer_powers]
    probs = list(interferer_probs)
    offset = np.sqrt(own_power)
    if own_prob is not None:
        amps = [offset] + amps
        probs = [own_prob] + probs
        offset = 0.0
    if not probs:
        return np.full(shape, gaussian_entropy(var)), []
    means, weights, dweights = sign_mixture(np.array(amps), probs)
    h, dh_dw = mixture_entropy(means + offset, weights, var, tol=tol, resolution=resolution, return_grad=True)
    grads = [np.sum(dh_dw * dw, axis=-1) for dw in dweights]
    return h, grads


def _check_dists(dists):
    out = []
    for p in dists:
        p = np.asarray(p, dtype=np.float64)
        if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
            raise InvalidInputError("symbol probabilities must lie in [0, 1]")
        out.append(p)
    return out


def entropy_y_given_x(interferer_dists, powers, own_power, noise_var_eff, dim=None,
                      tol=DEFAULT_TOL, resolution=1):
    """Per-dimension ``H(Y_ij | x)``; the own symbol is known.

    ``interferer_dists`` holds P(+1) arrays (one per interfering user) and
    ``powers`` their transmit powers. Returns an array over dimensions, or a
    float if ``dim`` is given.
    """
    dists = _check_dists(interferer_dists)
    if len(dists) != len(powers):
        raise InvalidInputError("one power per interferer distribution is required")
    if dim is not None:
        dists = [p[..., dim] for p in dists]
    h, _ = _entropy_with_grads(own_power, None, powers, dists, noise_var_eff, tol, resolution)
    return float(h) if np.ndim(h) == 0 else h


def entropy_y_given_s(own_dist, interferer_dists, powers, own_power, noise_var_eff, dim=None,
                      tol=DEFAULT_TOL, resolution=1):
    """Per-dimension ``H(Y_ij | s_i)``; the own symbol is marginalized too."""
    own = _check_dists([own_dist])[0]
    dists = _check_dists(interferer_dists)
    if len(dists) != len(powers):
        raise InvalidInputError("one power per interferer distribution is required")
    if dim is not None:
        own = own[..., dim]
        dists = [p[..., dim] for p in dists]
    h, _ = _entropy_with_grads(own_power, own, powers, dists, noise_var_eff, tol, resolution)
    return float(h) if np.ndim(h) == 0 else h


# ---------------------------------------------------------------------------
# full loss
# ---------------------------------------------------------------------------


@dataclass
class UserModel:
    encoder: nn.MlpParams
    decoder: nn.MlpParams

    def arrays(self):
        return self.encoder.arrays() + self.decoder.arrays()


@dataclass
class RibResult:
    loss: float
    grads: list  # per user: encoder grads + decoder grads, matching UserModel.arrays()
    cross_entropy: np.ndarray  # per user, batch/sample mean
    entropy_x: np.ndarray  # per user, batch mean of sum_j H(Y_ij | x)
    entropy_s: np.ndarray  # per user, batch mean of sum_j H(Y_ij | s_i)
    correct: np.ndarray  # per user, fraction of argmax hits over batch and samples


def draw_noise(realization, mc_samples, batch, code_dim, rng):
    """Standard-normal draws of shape ``(L, N, M, d)``, scaled later per user."""
    return as_rng(rng).standard_normal((mc_samples, realization.n_users, batch, code_dim))


def rib_loss(inputs, labels, models, omega, realization, mc_samples=1, rng=None, noise=None,
             quantize=True, tol=DEFAULT_TOL):
    """RIB objective and its gradient for one mini-batch.

    Parameters
    ----------
    inputs, labels : list
        Per user, a ``(M, input_dim)`` batch and its ``(M,)`` labels. Row
        ``m`` of every user goes out in the same channel use.
    models : list of UserModel
    omega : sequence of float
        Per-user weight of the entropy terms.
    realization : ChannelRealization
        Scalar gains per user.
    mc_samples : int
        Channel-noise samples ``L`` per data point.
    rng, noise :
        Noise source; pass ``noise`` (standard normal, shape
        ``(L, N, M, d)``) to freeze it.
    quantize : bool
        ``False`` replaces the sign quantizer by the identity, the smooth
        surrogate whose gradient the straight-through estimator uses.
    """
    n_users = len(models)
    if n_users != realization.n_users or len(inputs) != n_users or len(labels) != n_users:
        raise InvalidInputError("inputs, labels, models and realization disagree on user count")
    if mc_samples < 1:
        raise InvalidInputError("mc_samples must be >= 1")
    if np.ndim(realization.gains) != 1:
        raise InvalidInputError("rib_loss expects one scalar gain per user")
    omega = np.broadcast_to(np.asarray(omega, dtype=np.float64), (n_users,))
    batch = np.asarray(inputs[0]).shape[0]
    if batch == 0:
        raise InvalidInputError("empty batch")
    labels = [np.asarray(u, dtype=np.int64) for u in labels]

    enc_caches = [nn.forward(m.encoder, s) for m, s in zip(models, inputs)]
    feats = [c.output for c in enc_caches]
    codes = np.stack([binarize(a) if quantize else a for a in feats])  # (N, M, d)
    code_dim = codes.shape[-1]
    if noise is None:
        noise = draw_noise(realization, mc_samples, batch, code_dim, rng)
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != (mc_samples, n_users, batch, code_dim):
        raise InvalidInputError(f"noise shape {noise.shape} does not match (L, N, M, d)")

    amps = np.sqrt(realization.powers)
    noise_eff_std = np.sqrt(realization.noise_vars) / realization.gains
    sent = np.tensordot(amps, codes, axes=(0, 0))  # (M, d)

    grad_codes = np.zeros_like(codes)
    grads = [None] * n_users
    ce = np.zeros(n_users)
    correct = np.zeros(n_users)
    scale = 1.0 / (batch * mc_samples)
    rows = np.arange(batch)
    for i, model in enumerate(models):
        y_bar = sent[None] + noise_eff_std[i] * noise[:, i]  # (L, M, d)
        cache = nn.forward(model.decoder, y_bar.reshape(-1, code_dim))
        probs = cache.output.reshape(mc_samples, batch, -1)
        p_true = probs[:, rows, labels[i]]
        ce[i] = -np.mean(np.log(np.maximum(p_true, PROB_FLOOR)))
        correct[i] = np.mean(np.argmax(probs, axis=-1) == labels[i][None])
        upstream = np.zeros_like(probs)
        live = p_true >= PROB_FLOOR  # floored probabilities carry no gradient
        upstream[:, rows, labels[i]] = np.divide(-scale, p_true, out=np.zeros_like(p_true), where=live)
        dec_grads, g_in = nn.backward(model.decoder, cache, upstream.reshape(cache.output.shape))
        grads[i] = dec_grads
        g_sent = g_in.reshape(mc_samples, batch, code_dim).sum(axis=0)
        grad_codes += amps[:, None, None] * g_sent[None]

    grad_feats = [
        ste_backward(a, grad_codes[k]) if quantize else grad_codes[k].copy()
        for k, a in enumerate(feats)
    ]

    hx = np.zeros(n_users)
    hs = np.zeros(n_users)
    probs_plus = [bernoulli_from_features(a) for a in feats]
    for i in range(n_users):
        var = realization.noise_vars[i] / realization.gains[i] ** 2
        others = [k for k in range(n_users) if k != i]
        other_powers = [realization.powers[k] for k in others]
        other_probs = [probs_plus[k] for k in others]
        h_x, g_x = _entropy_with_grads(realization.powers[i], None, other_powers, other_probs, var, tol, 1,
                                       shape=feats[i].shape)
        h_s, g_s = _entropy_with_grads(realization.powers[i], probs_plus[i], other_powers, other_probs, var, tol, 1)
        hx[i] = np.sum(h_x) / batch
        hs[i] = np.sum(h_s) / batch
        if omega[i] == 0.0:
            continue
        coef = omega[i] / batch * 0.5  # d p_plus / d a = 1/2
        for slot, k in enumerate(others):
            grad_feats[k] += coef * g_x[slot]
            grad_feats[k] -= coef * g_s[slot + 1]
        grad_feats[i] -= coef * g_s[0]

    for k, model in enumerate(models):
        enc_grads, _ = nn.backward(model.encoder, enc_caches[k], grad_feats[k])
        grads[k] = enc_grads + grads[k]

    loss = float(np.sum(ce + omega * (hx - hs)))
    return RibResult(loss, grads, ce, hx, hs, correct)
