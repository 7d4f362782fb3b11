"""Joint training of N users' encoder/decoder pairs and their evaluation."""

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from .channel import ChannelRealization, db_to_linear, sample_rayleigh
from .data import Dataset
from .errors import InvalidInputError, TrainingDivergedError
from .rib import UserModel, rib_loss
from .signal import binarize

MAX_USERS = 4


@dataclass
class DataSpec:
    kind: str = "synthetic"
    classes: int = 4
    input_dim: int = 16
    per_class: int = 100
    test_per_class: int = 250
    spread: float = 0.35
    scale: float = 1.0
    images: str = ""
    labels: str = ""
    test_images: str = ""
    test_labels: str = ""


@dataclass
class TrainConfig:
    n_users: int = 2
    code_dim: int = 16
    epochs: int = 200
    batch_size: int = 64
    mc_samples: int = 2
    omega: list = field(default_factory=lambda: [0.05])
    learning_rate: float = 5e-4
    train_snr_db: float = 0.0
    hidden_dim: int = 32
    seed: int = 0
    steps_per_epoch: int = 0  # 0: one pass over the training set
    data: DataSpec = field(default_factory=DataSpec)

    def __post_init__(self):
        if isinstance(self.data, dict):
            self.data = DataSpec(**self.data)
        if np.isscalar(self.omega):
            self.omega = [float(self.omega)]
        self.omega = [float(w) for w in self.omega]
        if len(self.omega) == 1:
            self.omega = self.omega * self.n_users
        counts = (self.n_users, self.code_dim, self.batch_size, self.mc_samples, self.hidden_dim)
        if min(counts) < 1 or self.epochs < 0 or self.steps_per_epoch < 0:
            raise InvalidInputError("counts must be positive (epochs may be 0)")
        if self.n_users > MAX_USERS:
            raise InvalidInputError(f"at most {MAX_USERS} users are supported")
        if len(self.omega) != self.n_users or min(self.omega) < 0:
            raise InvalidInputError("omega needs one non-negative weight per user")
        if not self.learning_rate > 0:
            raise InvalidInputError("learning_rate must be positive")

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainResult:
    models: list
    history: list  # dicts: epoch, loss, acc (per user)
    config: TrainConfig


def init_models(config, input_dim, n_classes, rng):
    return [
        UserModel(
            nn.make_encoder(input_dim, config.code_dim, rng),
            nn.make_decoder(config.code_dim, config.hidden_dim, n_classes, rng),
        )
        for _ in range(config.n_users)
    ]


def train_realization(config):
    """Unit gains and equal unit powers; noise set by the training SNR."""
    return ChannelRealization.from_snr(config.n_users, config.train_snr_db)


def train(config, datasets, log=None):
    """Run the SFDMA training loop.

    Each epoch walks every user's training set in shuffled mini-batches;
    rows with the same batch index are transmitted in the same channel use.
    All encoders and decoders take one joint Adam step per mini-batch.
    """
    if isinstance(datasets, Dataset):
        datasets = [datasets] * config.n_users
    if len(datasets) != config.n_users:
        raise InvalidInputError("one dataset per user is required")
    input_dim = datasets[0].input_dim
    n_classes = datasets[0].n_classes
    if any(d.input_dim != input_dim or d.n_classes != n_classes for d in datasets):
        raise InvalidInputError("all users' datasets must share input_dim and class count")

    root = np.random.SeedSequence(config.seed)
    init_seq, noise_seq, eval_seq, *user_seqs = root.spawn(3 + config.n_users)
    models = init_models(config, input_dim, n_classes, np.random.default_rng(init_seq))
    noise_rng = np.random.default_rng(noise_seq)
    batch_rngs = [np.random.default_rng(s) for s in user_seqs]
    realization = train_realization(config)
    arrays = [a for m in models for a in m.arrays()]
    state = nn.AdamState.zeros_like(arrays)
    m_batch = config.batch_size
    n_min = min(len(d) for d in datasets)
    steps = config.steps_per_epoch or max(1, math.ceil(n_min / m_batch))

    # the objective reported per epoch uses the whole training set and one
    # frozen noise draw, so successive epochs are directly comparable
    eval_inputs = [d.features[:n_min] for d in datasets]
    eval_labels = [d.labels[:n_min] for d in datasets]
    eval_noise = np.random.default_rng(eval_seq).standard_normal(
        (config.mc_samples, config.n_users, n_min, config.code_dim))

    history = []
    for epoch in range(1, config.epochs + 1):
        orders = [rng.permutation(len(d)) for rng, d in zip(batch_rngs, datasets)]
        losses = []
        for step in range(steps):
            idx = []
            for order in orders:
                start = (step * m_batch) % len(order)
                take = np.take(order, np.arange(start, start + m_batch), mode="wrap")
                idx.append(take)
            inputs = [d.features[i] for d, i in zip(datasets, idx)]
            labels = [d.labels[i] for d, i in zip(datasets, idx)]
            res = rib_loss(inputs, labels, models, config.omega, realization,
                           config.mc_samples, rng=noise_rng)
            if not np.isfinite(res.loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, step {step}",
                    {"epoch": epoch, "step": step, "history": history},
                )
            grads = [g for gs in res.grads for g in gs]
            nn.adam_step(arrays, grads, state, config.learning_rate)
            for m in models:
                m.encoder.touch()
                m.decoder.touch()
            losses.append(res.loss)
        full = rib_loss(eval_inputs, eval_labels, models, config.omega, realization,
                        config.mc_samples, noise=eval_noise)
        row = {"epoch": epoch, "loss": full.loss, "batch_loss": float(np.mean(losses)),
               "acc": [float(a) for a in full.correct]}
        history.append(row)
        if log is not None:
            log(row)
    return TrainResult(models, history, config)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def save_models(models, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, m in enumerate(models, start=1):
        m.encoder.save(directory / f"user_{i}_encoder.json")
        m.decoder.save(directory / f"user_{i}_decoder.json")


def load_models(directory):
    directory = Path(directory)
    models = []
    i = 1
    while (directory / f"user_{i}_encoder.json").exists():
        models.append(UserModel(
            nn.MlpParams.load(directory / f"user_{i}_encoder.json"),
            nn.MlpParams.load(directory / f"user_{i}_decoder.json"),
        ))
        i += 1
    if not models:
        raise FileNotFoundError(f"no user_1_encoder.json under {directory}")
    return models


def history_csv_rows(history):
    n_users = len(history[0]["acc"]) if history else 0
    header = ["epoch", "loss"] + [f"acc_user_{i}" for i in range(1, n_users + 1)]
    rows = [[h["epoch"], h["loss"], *h["acc"]] for h in history]
    return header, rows


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def encode(model, features):
    """Transmitted BPSK code for a batch of inputs."""
    return binarize(nn.predict(model.encoder, features))


def _as_list(datasets, n_users):
    if isinstance(datasets, Dataset):
        return [datasets] * n_users
    if len(datasets) != n_users:
        raise InvalidInputError("one dataset per user is required")
    return list(datasets)


def _trial_draws(rng, n_users, n, code_dim, fading):
    perms = np.stack([rng.permutation(n) for _ in range(n_users)])
    gains = sample_rayleigh(n_users, rng, size=n) if fading else np.ones((n_users, n))
    noise = rng.standard_normal((n_users, n, code_dim))
    return perms, gains, noise


def _trial_rng(seed, trial):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial)]))


@dataclass
class Accuracy:
    value: np.ndarray  # per user
    stderr: np.ndarray
    n: int

    def __iter__(self):
        return iter(self.value)


def _binomial(hits, n):
    acc = hits / n
    return acc, np.sqrt(np.maximum(acc * (1.0 - acc), 0.0) / n)


def evaluate_accuracy(models, datasets, test_snr_db, trials=1, seed=0, fading=True,
                      interference=True, noiseless=False, power=1.0):
    """Monte-Carlo classification accuracy of every user.

    Every trial pairs each user's test samples with independently shuffled
    samples of the other users, draws a Rayleigh fade per frame (unless
    ``fading`` is off) and fresh noise at ``test_snr_db``.
    ``interference=False`` removes the other users' signals and
    ``noiseless=True`` the noise, giving paired reference evaluations on the
    same draws.
    """
    if trials < 1:
        raise InvalidInputError("trials must be >= 1")
    n_users = len(models)
    datasets = _as_list(datasets, n_users)
    n = min(len(d) for d in datasets)
    codes = np.stack([encode(m, d.features[:n]) for m, d in zip(models, datasets)])
    labels = np.stack([d.labels[:n] for d in datasets])
    code_dim = codes.shape[-1]
    noise_std = np.sqrt(power / db_to_linear(test_snr_db))
    amp = np.sqrt(power)
    hits = np.zeros(n_users)
    for t in range(trials):
        perms, gains, noise = _trial_draws(_trial_rng(seed, t), n_users, n, code_dim, fading)
        sent = np.stack([amp * codes[k][perms[k]] for k in range(n_users)])
        total = sent.sum(axis=0)
        for i, m in enumerate(models):
            signal = total if interference else sent[i]
            y_bar = signal if noiseless else signal + noise_std * noise[i] / gains[i][:, None]
            pred = np.argmax(nn.predict(m.decoder, y_bar), axis=-1)
            hits[i] += np.sum(pred == labels[i][perms[i]])
    acc, err = _binomial(hits, n * trials)
    return Accuracy(acc, err, n * trials)


def cross_decoding_report(models, dataset, snr_db, trials=1, seed=0, fading=True, power=1.0):
    """Accuracy of decoder ``i`` applied to user ``j``'s interference-free signal.

    All users encode the same inputs. Row ``i`` is the decoder, column ``j``
    the transmitting user; the diagonal is own-decoding accuracy, the
    off-diagonal entries measure leakage.
    """
    n_users = len(models)
    n = len(dataset)
    codes = np.stack([encode(m, dataset.features) for m in models])
    code_dim = codes.shape[-1]
    noise_std = np.sqrt(power / db_to_linear(snr_db))
    hits = np.zeros((n_users, n_users))
    for t in range(trials):
        perms, gains, noise = _trial_draws(_trial_rng(seed, t), n_users, n, code_dim, fading)
        order = perms[0]
        truth = dataset.labels[order]
        for i, m in enumerate(models):
            for j in range(n_users):
                y_bar = np.sqrt(power) * codes[j][order] + noise_std * noise[i] / gains[i][:, None]
                pred = np.argmax(nn.predict(m.decoder, y_bar), axis=-1)
                hits[i, j] += np.sum(pred == truth)
    acc, err = _binomial(hits, n * trials)
    return Accuracy(acc, err, n * trials)


def orthogonality_report(models, probes):
    """Pairwise cosine and angle between users' codes for identical inputs.

    ``cosine`` is the mean over probes of the normalized inner product and
    ``angle_deg`` its arccos; ``mean_abs_cosine`` averages the magnitude
    per probe instead.
    """
    if len(models) < 2:
        raise InvalidInputError("orthogonality needs at least two users")
    features = probes.features if isinstance(probes, Dataset) else np.asarray(probes, dtype=np.float64)
    codes = [encode(m, features) for m in models]
    out = []
    for i in range(len(models)):
        for j in range(i + 1, len(models)):
            a, b = codes[i], codes[j]
            cos = np.sum(a * b, axis=-1) / (np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1))
            mean_cos = float(np.mean(cos))
            out.append({
                "user_a": i + 1,
                "user_b": j + 1,
                "cosine": mean_cos,
                "mean_abs_cosine": float(np.mean(np.abs(cos))),
                "angle_deg": float(np.degrees(np.arccos(np.clip(mean_cos, -1.0, 1.0)))),
            })
    return out


def config_json(config):
    return json.dumps(config.to_dict(), sort_keys=True)
