"""Real-equivalent multi-user broadcast channel.

Every user's receiver sees the power-scaled superposition of all users'
codes, multiplied by its own fading magnitude, plus real Gaussian noise::

    y_i = g_i * sum_k sqrt(p_k) x_k + n_i,   n_i ~ N(0, sigma_i^2)

Gains are block-fading magnitudes: one value per user per frame.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InvalidInputError


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=np.float64) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=np.float64))


def as_rng(rng):
    """Accept a Generator, an int seed, or a SeedSequence."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True)
class ChannelRealization:
    """Gains, noise variances and powers of one broadcast instant.

    ``gains`` holds |g_i| with shape ``(N,)``, or ``(N, *frames)`` when each
    frame of a batch sees its own fade. ``noise_vars`` and ``powers`` have
    shape ``(N,)``.
    """

    gains: np.ndarray
    noise_vars: np.ndarray
    powers: np.ndarray

    def __post_init__(self):
        gains = np.asarray(self.gains, dtype=np.float64)
        noise_vars = np.asarray(self.noise_vars, dtype=np.float64).reshape(-1)
        powers = np.asarray(self.powers, dtype=np.float64).reshape(-1)
        if gains.ndim == 0:
            gains = gains.reshape(1)
        n = gains.shape[0]
        if n < 1:
            raise InvalidInputError("need at least one user")
        if noise_vars.shape != (n,) or powers.shape != (n,):
            raise InvalidInputError(
                f"inconsistent user counts: gains {gains.shape[0]}, "
                f"noise_vars {noise_vars.shape}, powers {powers.shape}"
            )
        if not np.all(gains > 0):
            raise InvalidInputError("channel gains must be positive")
        if not np.all(noise_vars > 0):
            raise InvalidInputError("noise variances must be positive")
        if not np.all(powers >= 0):
            raise InvalidInputError("powers must be non-negative")
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "noise_vars", noise_vars)
        object.__setattr__(self, "powers", powers)

    @property
    def n_users(self):
        return self.gains.shape[0]

    @classmethod
    def from_snr(cls, n_users, snr_db, gains=None, power=1.0):
        """Equal powers with noise set so that ``power / sigma^2`` is ``snr_db``."""
        noise_var = power / db_to_linear(snr_db)
        if gains is None:
            gains = np.ones(n_users)
        return cls(
            gains=gains,
            noise_vars=np.full(n_users, noise_var),
            powers=np.full(n_users, float(power)),
        )


def sample_rayleigh(n_users, rng_seed, size=()):
    """Draw Rayleigh fading magnitudes with unit mean-square.

    Returns an array of shape ``(n_users, *size)``.
    """
    if int(n_users) < 1:
        raise InvalidInputError("n_users must be >= 1")
    rng = as_rng(rng_seed)
    shape = (int(n_users),) + tuple(np.atleast_1d(size).astype(int).tolist())
    g = rng.rayleigh(scale=np.sqrt(0.5), size=shape)
    # rayleigh() can return exactly 0 with vanishing probability
    return np.maximum(g, np.finfo(np.float64).tiny)


def _check_user(realization, user):
    if not 0 <= user < realization.n_users:
        raise InvalidInputError(
            f"user index {user} out of range for {realization.n_users} users"
        )


def superpose(codes, powers):
    """Noise-free transmitted sum ``sum_k sqrt(p_k) x_k`` over the user axis."""
    codes = np.asarray(codes, dtype=np.float64)
    amp = np.sqrt(np.asarray(powers, dtype=np.float64))
    return np.tensordot(amp, codes, axes=(0, 0))


def broadcast(codes, realization, user, rng=None):
    """Signal received by ``user`` before equalization.

    ``codes`` has shape ``(N, *frames, d)``. With ``rng=None`` the noise term
    is omitted.
    """
    codes = np.asarray(codes, dtype=np.float64)
    _check_user(realization, user)
    if codes.ndim < 2 or codes.shape[0] != realization.n_users:
        raise InvalidInputError(
            f"expected codes of shape (N={realization.n_users}, ..., d), got {codes.shape}"
        )
    g = realization.gains[user]
    if np.ndim(g) > 0:
        g = np.asarray(g)[..., None]
    y = g * superpose(codes, realization.powers)
    if rng is not None:
        rng = as_rng(rng)
        y = y + rng.normal(0.0, np.sqrt(realization.noise_vars[user]), size=y.shape)
    return y


def equalize(y, g):
    """Divide out a known fading magnitude."""
    g = np.asarray(g, dtype=np.float64)
    if not np.all(g > 0):
        raise DegenerateInputError("cannot equalize with a non-positive gain")
    if g.ndim > 0:
        g = g[..., None]
    return np.asarray(y, dtype=np.float64) / g


def sinr(realization, user):
    """Received SINR of ``user`` (linear scale)."""
    _check_user(realization, user)
    p = realization.powers
    g2 = np.asarray(realization.gains[user]) ** 2
    interference = (p.sum() - p[user]) * g2
    out = p[user] * g2 / (interference + realization.noise_vars[user])
    return float(out) if out.ndim == 0 else out


def sinr_all(gains_sq, powers, noise_vars):
    """Vectorized SINR for every user; ``gains_sq`` may carry trailing draw axes."""
    gains_sq = np.asarray(gains_sq, dtype=np.float64)
    powers = np.asarray(powers, dtype=np.float64)
    noise_vars = np.asarray(noise_vars, dtype=np.float64)
    extra = (1,) * (gains_sq.ndim - 1)
    p = powers.reshape(powers.shape + extra) if powers.ndim == 1 else powers
    nv = noise_vars.reshape(noise_vars.shape + extra)
    total = p.sum(axis=0, keepdims=True)
    return p * gains_sq / ((total - p) * gains_sq + nv)
