"""Dense networks with hand-written backpropagation and Adam.

Weights are stored as ``(out, in)`` matrices and applied to row-batches,
``h = x @ W.T + b``. Everything runs in float64 so gradients can be checked
against finite differences.
"""

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, ParseError, TrainingDivergedError

ACTIVATIONS = ("tanh", "relu", "identity", "softmax")
FORMAT_VERSION = 1

_version_counter = itertools.count(1)


@dataclass
class MlpParams:
    layer_dims: list
    weights: list
    biases: list
    activations: list
    version: int = field(default=0, compare=False)

    def __post_init__(self):
        self.layer_dims = [int(n) for n in self.layer_dims]
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        self.activations = list(self.activations)
        n_layers = len(self.layer_dims) - 1
        if n_layers < 1 or any(n <= 0 for n in self.layer_dims):
            raise InvalidInputError(f"bad layer_dims {self.layer_dims}")
        if not (len(self.weights) == len(self.biases) == len(self.activations) == n_layers):
            raise InvalidInputError("weights, biases and activations must have one entry per layer")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_dims[k + 1], self.layer_dims[k])
            if w.shape != expected:
                raise InvalidInputError(f"layer {k}: weight shape {w.shape}, expected {expected}")
            if b.shape != (expected[0],):
                raise InvalidInputError(f"layer {k}: bias shape {b.shape}, expected {(expected[0],)}")
        for k, act in enumerate(self.activations):
            if act not in ACTIVATIONS:
                raise InvalidInputError(f"unknown activation {act!r}")
            if act == "softmax" and k != n_layers - 1:
                raise InvalidInputError("softmax is only allowed as the final activation")
        self.touch()

    @classmethod
    def init(cls, layer_dims, activations, rng):
        """Glorot-uniform weights, zero biases."""
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(list(layer_dims), weights, biases, list(activations))

    @property
    def n_layers(self):
        return len(self.weights)

    def arrays(self):
        """Parameter arrays in a fixed order: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def touch(self):
        """Mark the parameters as modified; outstanding forward caches go stale."""
        self.version = next(_version_counter)

    def copy(self):
        return MlpParams(
            list(self.layer_dims),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            list(self.activations),
        )

    def to_dict(self):
        return {
            "format_version": FORMAT_VERSION,
            "layer_dims": list(self.layer_dims),
            "activations": list(self.activations),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, obj):
        try:
            version = obj["format_version"]
            if version != FORMAT_VERSION:
                raise ParseError(f"unsupported checkpoint format_version {version}")
            return cls(
                obj["layer_dims"],
                [np.array(w, dtype=np.float64) for w in obj["weights"]],
                [np.array(b, dtype=np.float64) for b in obj["biases"]],
                obj["activations"],
            )
        except KeyError as exc:
            raise ParseError(f"checkpoint missing field {exc}") from None
        except InvalidInputError as exc:
            raise ParseError(f"invalid checkpoint: {exc}") from None

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def make_encoder(input_dim, code_dim, rng):
    """Single dense layer followed by tanh."""
    return MlpParams.init([input_dim, code_dim], ["tanh"], rng)


def make_decoder(code_dim, hidden_dim, n_classes, rng):
    """Three dense layers: two ReLU, softmax output."""
    return MlpParams.init(
        [code_dim, hidden_dim, hidden_dim, n_classes], ["relu", "relu", "softmax"], rng
    )


def _activate(kind, h):
    if kind == "tanh":
        return np.tanh(h)
    if kind == "relu":
        return np.maximum(h, 0.0)
    if kind == "identity":
        return h
    shifted = h - h.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _activate_backward(kind, h, out, upstream):
    if kind == "tanh":
        return upstream * (1.0 - out * out)
    if kind == "relu":
        return upstream * (h > 0.0)
    if kind == "identity":
        return upstream
    # softmax Jacobian-vector product
    return out * (upstream - np.sum(out * upstream, axis=-1, keepdims=True))


@dataclass
class ForwardCache:
    inputs: list
    pre: list
    activations: list
    version: int
    squeeze: bool

    @property
    def output(self):
        out = self.activations[-1]
        return out[0] if self.squeeze else out


def forward(params, x):
    """Run the network on a row-batch (or single vector).

    Returns a :class:`ForwardCache`; ``cache.output`` is the network output and
    ``cache.activations`` the per-layer activations.
    """
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.layer_dims[0]:
        raise InvalidInputError(
            f"input shape {x.shape} does not match input dim {params.layer_dims[0]}"
        )
    inputs, pre, acts = [], [], []
    h_in = x
    for w, b, kind in zip(params.weights, params.biases, params.activations):
        inputs.append(h_in)
        h = h_in @ w.T + b
        out = _activate(kind, h)
        pre.append(h)
        acts.append(out)
        h_in = out
    return ForwardCache(inputs, pre, acts, params.version, squeeze)


def predict(params, x):
    return forward(params, x).output


def backward(params, cache, upstream):
    """Reverse-mode gradients for a forward pass.

    ``upstream`` is dLoss/dOutput with the output's shape. Returns
    ``(grads, grad_input)`` where ``grads`` follows :meth:`MlpParams.arrays`.
    """
    if cache.version != params.version:
        raise InvalidInputError("stale forward cache: parameters changed since forward()")
    g = np.asarray(upstream, dtype=np.float64)
    if cache.squeeze:
        g = g[None, :]
    if g.shape != cache.activations[-1].shape:
        raise InvalidInputError(
            f"upstream shape {g.shape} does not match output {cache.activations[-1].shape}"
        )
    grads = [None] * (2 * params.n_layers)
    for k in reversed(range(params.n_layers)):
        g = _activate_backward(params.activations[k], cache.pre[k], cache.activations[k], g)
        grads[2 * k] = g.T @ cache.inputs[k]
        grads[2 * k + 1] = g.sum(axis=0)
        g = g @ params.weights[k]
    return grads, (g[0] if cache.squeeze else g)


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0

    @classmethod
    def zeros_like(cls, arrays):
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], 0)


def adam_step(arrays, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """In-place Adam update of ``arrays``; returns ``(arrays, state)``.

    ``arrays`` may be an :class:`MlpParams` or a flat list of parameter
    arrays (several models trained jointly).
    """
    owner = arrays if isinstance(arrays, MlpParams) else None
    if owner is not None:
        arrays = owner.arrays()
    if len(arrays) != len(grads) or len(arrays) != len(state.m):
        raise InvalidInputError("parameter, gradient and state lists differ in length")
    for a, g in zip(arrays, grads):
        if a.shape != np.shape(g):
            raise InvalidInputError(f"gradient shape {np.shape(g)} != parameter shape {a.shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingDivergedError("non-finite gradient", {"step": state.step})
    state.step += 1
    bc1 = 1.0 - beta1**state.step
    bc2 = 1.0 - beta2**state.step
    for a, g, m, v in zip(arrays, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        a -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    if owner is not None:
        owner.touch()
        return owner, state
    return arrays, state


def grad_check(loss_fn, arrays, h=1e-5, n_probe=64, rng=0, floor=1e-12):
    """Compare analytic gradients with central differences.

    ``loss_fn(arrays) -> (loss, grads)`` must be deterministic. A random
    subset of at most ``n_probe`` scalar entries is perturbed in place (and
    restored). Returns the max of
    ``|analytic - fd| / max(|analytic|, |fd|, floor)`` over the subset.
    """
    rng = np.random.default_rng(rng)
    _, grads = loss_fn(arrays)
    grads = [np.array(g, dtype=np.float64) for g in grads]
    sizes = np.array([a.size for a in arrays])
    total = int(sizes.sum())
    picks = rng.choice(total, size=min(n_probe, total), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    worst = 0.0
    for flat in np.sort(picks):
        k = int(np.searchsorted(offsets, flat, side="right") - 1)
        idx = np.unravel_index(flat - offsets[k], arrays[k].shape)
        orig = arrays[k][idx]
        arrays[k][idx] = orig + h
        up, _ = loss_fn(arrays)
        arrays[k][idx] = orig - h
        down, _ = loss_fn(arrays)
        arrays[k][idx] = orig
        fd = (up - down) / (2.0 * h)
        an = grads[k][idx]
        err = abs(an - fd) / max(abs(an), abs(fd), floor)
        worst = max(worst, err)
    return worst
