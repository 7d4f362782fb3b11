"""ABG curve: task performance as a saturating function of received SINR.

    phi(sinr) = alpha - gamma / (1 + (beta * sinr) ** tau)

SINR is linear throughout; convert at the edges with
:func:`sfdma.channel.db_to_linear`.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import InfeasibleTargetError, InvalidInputError, SolverError

GAMMA_MIN = 1e-3
BETA_BOUNDS = (1e-4, 1e4)
TAU_BOUNDS = (0.05, 10.0)
ALPHA_HEADROOM = 50.0
TAU_STARTS = (0.5, 1.0, 1.5, 2.0, 3.0)
BETA_STARTS = tuple(np.logspace(-2, 2, 5))


class AbgWarning(UserWarning):
    pass


@dataclass(frozen=True)
class AbgParams:
    alpha: float
    beta: float
    gamma: float
    tau: float

    def __post_init__(self):
        vals = (self.alpha, self.beta, self.gamma, self.tau)
        if not all(np.isfinite(v) for v in vals):
            raise InvalidInputError("ABG parameters must be finite")
        if self.beta <= 0 or self.gamma <= 0 or self.tau <= 0:
            raise InvalidInputError("beta, gamma and tau must be positive")

    @property
    def floor(self):
        """Performance at zero SINR."""
        return self.alpha - self.gamma

    def to_dict(self):
        return {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma, "tau": self.tau}

    @classmethod
    def from_dict(cls, obj):
        if "zeta" in obj:
            warnings.warn("ABG parameter 'zeta' is not part of the model; ignored", AbgWarning,
                          stacklevel=2)
        return cls(float(obj["alpha"]), float(obj["beta"]), float(obj["gamma"]), float(obj["tau"]))


#: Fitted values reported for the MNIST classifier (accuracy in percent).
TABLE_PARAMS = AbgParams(alpha=95.0, beta=15.7, gamma=82.93, tau=1.427)


@dataclass(frozen=True)
class FitSample:
    sinr: float
    phi: float


@dataclass
class FitResult:
    params: AbgParams
    residual_rms: float
    n_samples: int
    start_index: int

    def to_dict(self):
        out = self.params.to_dict()
        out.update(residual_rms=self.residual_rms, n_samples=self.n_samples)
        return out


def _curve(alpha, beta, gamma, tau, sinr):
    return alpha - gamma / (1.0 + (beta * sinr) ** tau)


def abg_eval(params, sinr):
    sinr = np.asarray(sinr, dtype=np.float64)
    if np.any(sinr < 0):
        raise InvalidInputError("SINR must be non-negative")
    out = _curve(params.alpha, params.beta, params.gamma, params.tau, sinr)
    return float(out) if out.ndim == 0 else out


def required_sinr(params, eta):
    """Smallest linear SINR at which the curve reaches ``eta``.

    Targets at or below the zero-SINR floor need no SINR at all: 0.0 is
    returned with an :class:`AbgWarning`.
    """
    if eta >= params.alpha:
        raise InfeasibleTargetError(
            f"target {eta} is not below the asymptote alpha={params.alpha}"
        )
    if eta <= params.floor:
        warnings.warn(f"target {eta} is met at zero SINR (floor {params.floor})", AbgWarning,
                      stacklevel=2)
        return 0.0
    return (params.gamma / (params.alpha - eta) - 1.0) ** (1.0 / params.tau) / params.beta


def _unpack_samples(samples, phi):
    if phi is None:
        sinr = np.array([s.sinr for s in samples], dtype=np.float64)
        phi = np.array([s.phi for s in samples], dtype=np.float64)
    else:
        sinr = np.asarray(samples, dtype=np.float64)
        phi = np.asarray(phi, dtype=np.float64)
    if sinr.shape != phi.shape or sinr.ndim != 1:
        raise InvalidInputError("sinr and phi must be matching 1-D arrays")
    return sinr, phi


def abg_fit(samples, phi=None):
    """Box-constrained least-squares fit of the ABG curve.

    ``samples`` is a list of :class:`FitSample`, or an array of linear SINRs
    with ``phi`` given separately. Every combination of the starting
    exponents and scales is tried; the lowest residual wins, ties going to
    the earliest start.
    """
    sinr, phi = _unpack_samples(samples, phi)
    if sinr.size < 4:
        raise InvalidInputError("at least 4 samples are required")
    if np.any(sinr < 0) or not np.all(np.isfinite(phi)):
        raise InvalidInputError("SINR must be non-negative and performance finite")
    positive = sinr[sinr > 0]
    if positive.size == 0 or (np.all(sinr > 0) and positive.max() < 10.0 * positive.min()):
        raise InvalidInputError("samples must span at least one decade of SINR")

    top = float(phi.max())
    if np.ptp(phi) == 0.0:
        params = AbgParams(top, BETA_BOUNDS[1], GAMMA_MIN, TAU_BOUNDS[1])
        resid = abg_eval(params, sinr) - phi
        return FitResult(params, float(np.sqrt(np.mean(resid**2))), sinr.size, -1)

    # parameter vector: alpha, log(beta), gamma, tau
    lower = [top, np.log(BETA_BOUNDS[0]), GAMMA_MIN, TAU_BOUNDS[0]]
    upper = [top + ALPHA_HEADROOM, np.log(BETA_BOUNDS[1]), top + ALPHA_HEADROOM, TAU_BOUNDS[1]]

    def residuals(v):
        return _curve(v[0], np.exp(v[1]), v[2], v[3], sinr) - phi

    def jacobian(v):
        alpha, beta, gamma, tau = v[0], np.exp(v[1]), v[2], v[3]
        with np.errstate(divide="ignore"):
            log_bs = np.where(sinr > 0, np.log(beta * np.where(sinr > 0, sinr, 1.0)), -np.inf)
        t = np.exp(tau * log_bs)  # (beta sinr)^tau, 0 at sinr = 0
        denom = (1.0 + t) ** 2
        d_tau = np.where(sinr > 0, gamma * t * np.where(sinr > 0, log_bs, 0.0) / denom, 0.0)
        return np.column_stack([
            np.ones_like(sinr),
            gamma * tau * t / denom,
            -1.0 / (1.0 + t),
            d_tau,
        ])

    best = None
    gamma0 = min(max(np.ptp(phi), 2 * GAMMA_MIN), upper[2])
    starts = [(tau0, beta0) for tau0 in TAU_STARTS for beta0 in BETA_STARTS]
    for k, (tau0, beta0) in enumerate(starts):
        x0 = np.clip([top + 1e-6 * max(abs(top), 1.0), np.log(beta0), gamma0, tau0], lower, upper)
        try:
            fit = least_squares(residuals, x0, jac=jacobian, bounds=(lower, upper), method="trf",
                                x_scale="jac", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
        except (ValueError, FloatingPointError):
            continue
        if not np.all(np.isfinite(fit.fun)):
            continue
        rms = float(np.sqrt(np.mean(fit.fun**2)))
        if best is None or rms < best[0]:
            best = (rms, k, fit.x)
    if best is None:
        raise SolverError("every ABG fit start diverged")
    rms, k, v = best
    params = AbgParams(float(v[0]), float(np.exp(v[1])), float(v[2]), float(v[3]))
    return FitResult(params, rms, sinr.size, k)
