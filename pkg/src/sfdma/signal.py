"""Feature quantization, BPSK mapping and power normalization.

Features are real arrays whose last axis is the code dimension ``d``;
leading axes are treated as a batch.
"""

import numpy as np

from .errors import DegenerateInputError, InvalidInputError

#: |a| above which the straight-through gradient is zeroed (hard-tanh STE).
STE_CLIP = 1.0


def _as_features(a):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 0 or a.shape[-1] == 0:
        raise InvalidInputError("feature vector must have length d > 0")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("feature vector contains non-finite entries")
    return a


def binarize(a):
    """Sign quantizer onto {-1, +1}; zero maps to +1."""
    a = _as_features(a)
    return np.where(a >= 0.0, 1.0, -1.0)


def ste_backward(a, upstream):
    """Clipped straight-through gradient of :func:`binarize`.

    The upstream gradient passes unchanged where ``|a| <= 1`` and is zeroed
    elsewhere.
    """
    a = np.asarray(a, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    if a.shape != upstream.shape:
        raise InvalidInputError(
            f"shape mismatch: features {a.shape} vs upstream {upstream.shape}"
        )
    return np.where(np.abs(a) <= STE_CLIP, upstream, 0.0)


def bpsk_modulate(z):
    """Map bipolar code symbols to real unit-energy BPSK symbols.

    Over the {-1, +1} alphabet this is the identity; it is kept as its own
    stage so another constellation can be slotted in.
    """
    z = np.asarray(z, dtype=np.float64)
    if not np.all((z == 1.0) | (z == -1.0)):
        raise InvalidInputError("BPSK input must be a bipolar code over {-1, +1}")
    return z.copy()


def symbol_power(x):
    """Mean per-symbol energy along the last axis."""
    x = np.asarray(x, dtype=np.float64)
    return np.mean(x * x, axis=-1)


def normalize_vector(t):
    """Scale ``t`` to unit L2 norm along the last axis."""
    t = np.asarray(t, dtype=np.float64)
    norm = np.linalg.norm(t, axis=-1, keepdims=True)
    if np.any(norm == 0.0) or not np.all(np.isfinite(norm)):
        raise DegenerateInputError("cannot normalize a zero (or non-finite) vector")
    return t / norm
