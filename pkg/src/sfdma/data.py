"""Datasets: seeded Gaussian blobs and an IDX (MNIST format) reader."""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, ParseError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class Dataset:
    features: np.ndarray  # (n, input_dim)
    labels: np.ndarray  # (n,) int
    n_classes: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] == 0:
            raise InvalidInputError("dataset must be a non-empty (n, input_dim) array")
        if self.labels.shape != (self.features.shape[0],):
            raise InvalidInputError("one label per sample is required")
        if np.any(self.labels < 0) or np.any(self.labels >= self.n_classes):
            raise InvalidInputError(f"labels must lie in [0, {self.n_classes})")

    def __len__(self):
        return self.labels.shape[0]

    @property
    def input_dim(self):
        return self.features.shape[1]

    def subset(self, idx):
        return Dataset(self.features[idx], self.labels[idx], self.n_classes)


def simplex_vertices(n_classes, input_dim, rng):
    """Unit-norm, centred regular-simplex vertices, randomly rotated."""
    if input_dim < n_classes:
        raise InvalidInputError("input_dim must be at least the number of classes")
    verts = np.eye(n_classes) - 1.0 / n_classes
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    padded = np.zeros((n_classes, input_dim))
    padded[:, :n_classes] = verts
    q, r = np.linalg.qr(rng.standard_normal((input_dim, input_dim)))
    q *= np.sign(np.diag(r))
    return padded @ q.T


def make_synthetic(classes, input_dim, per_class, spread, seed, scale=1.0):
    """Isotropic Gaussian blobs around scaled simplex vertices.

    Equivalent to the first set of :func:`make_split`; use that function
    when train and test sets must share class means.
    """
    return make_split(classes, input_dim, [per_class], spread, seed, scale)[0]


def make_split(classes, input_dim, per_class, spread, seed, scale=1.0):
    """Several datasets (e.g. train and test) over one set of class means."""
    if classes < 2:
        raise InvalidInputError("need at least two classes")
    if spread < 0 or scale <= 0 or min(per_class) < 1:
        raise InvalidInputError("spread must be >= 0, scale > 0 and per_class >= 1")
    seq = np.random.SeedSequence(seed)
    geometry, *draws = seq.spawn(1 + len(per_class))
    means = scale * simplex_vertices(classes, input_dim, np.random.default_rng(geometry))
    out = []
    for count, child in zip(per_class, draws):
        rng = np.random.default_rng(child)
        labels = np.repeat(np.arange(classes), count)
        feats = means[labels] + spread * rng.standard_normal((labels.size, input_dim))
        order = rng.permutation(labels.size)
        out.append(Dataset(feats[order], labels[order], classes))
    return out


def _read_idx(path, magic):
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise ParseError(f"{path}: file too short for an IDX header")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise ParseError(f"{path}: bad magic 0x{found:08x}, expected 0x{magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise ParseError(f"{path}: truncated dimension header")
    dims = struct.unpack(">" + "I" * ndim, raw[4:header])
    count = int(np.prod(dims))
    if len(raw) - header < count:
        raise ParseError(f"{path}: truncated payload ({len(raw) - header} of {count} bytes)")
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=header).reshape(dims)


def load_idx(images_path, labels_path, n_classes=None):
    """Read an IDX image/label pair; pixels scaled to [0, 1], images flattened."""
    images = _read_idx(images_path, IDX_IMAGES_MAGIC)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC).astype(np.int64)
    if images.shape[0] != labels.shape[0]:
        raise ParseError(
            f"image count {images.shape[0]} does not match label count {labels.shape[0]}"
        )
    feats = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    if n_classes is None:
        n_classes = max(int(labels.max()) + 1, 2)
    return Dataset(feats, labels, n_classes)


def write_idx(images, labels, images_path, labels_path):
    """Write uint8 images ``(n, rows, cols)`` and labels in IDX format."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, *images.shape))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())
