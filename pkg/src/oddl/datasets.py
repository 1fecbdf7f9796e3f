"""Dataset containers and loaders (MNIST IDX, USPS text, npz, synthetic)."""

import gzip
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, FormatError
from .preprocessing import normalize

IDX_LABELS_MAGIC = 0x00000801
IDX_IMAGES_MAGIC = 0x00000803
USPS_FEATURES = 256
FORMATS = ("idx", "usps-text", "generic-binary", "synthetic")


@dataclass
class Dataset:
    """Labeled signals stored one per row.

    ``degenerate`` flags rows that were constant before normalization; they
    are kept but never drawn as initial atoms.
    """

    X: np.ndarray
    labels: np.ndarray
    n_classes: int
    degenerate: np.ndarray = None
    image_shape: tuple = None
    name: str = ""
    class_names: list = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.X.ndim != 2 or self.labels.shape != (self.X.shape[0],):
            raise DataError(
                f"signals {self.X.shape} and labels {self.labels.shape} are inconsistent"
            )
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise DataError(f"labels must lie in [0, {self.n_classes})")
        if self.degenerate is None:
            self.degenerate = np.zeros(len(self.labels), dtype=bool)
        if not self.class_names:
            self.class_names = [str(c) for c in range(self.n_classes)]

    def __len__(self):
        return self.X.shape[0]

    @property
    def n_features(self):
        return self.X.shape[1]

    def subset(self, index):
        return Dataset(self.X[index], self.labels[index], self.n_classes,
                       self.degenerate[index], self.image_shape, self.name,
                       list(self.class_names))


def _open(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def load_idx(path):
    """Parse a big-endian IDX file holding uint8 images or labels.

    Returns a ``(count, rows, cols)`` array for image files and a ``(count,)``
    array for label files.
    """
    with _open(path) as fh:
        data = fh.read()
    if len(data) < 8:
        raise FormatError(f"{path}: file too short for an IDX header ({len(data)} bytes)", 0)
    (magic,) = struct.unpack(">I", data[:4])
    if magic == IDX_LABELS_MAGIC:
        ndim = 1
    elif magic == IDX_IMAGES_MAGIC:
        ndim = 3
    else:
        raise FormatError(f"{path}: bad IDX magic 0x{magic:08x}", 0)
    header_len = 4 + 4 * ndim
    if len(data) < header_len:
        raise FormatError(
            f"{path}: header needs {header_len} bytes, file has {len(data)}", len(data)
        )
    dims = struct.unpack(f">{ndim}I", data[4:header_len])
    expected = int(np.prod(dims, dtype=np.int64))
    actual = len(data) - header_len
    if actual != expected:
        raise FormatError(
            f"{path}: expected {expected} payload bytes for dims {dims}, found {actual}",
            header_len + min(actual, expected),
        )
    return np.frombuffer(data, dtype=np.uint8, offset=header_len).reshape(dims).copy()


def load_usps(path):
    """Read the whitespace-delimited USPS text format.

    Each non-blank line is a label followed by 256 gray values of a 16x16
    image.  Returns ``(images, labels)`` with ``images`` of shape
    ``(count, 16, 16)``.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    images, labels = [], []
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rt") as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) != USPS_FEATURES + 1:
                raise FormatError(
                    f"{path}: expected {USPS_FEATURES + 1} values, found {len(tokens)}",
                    f"line {lineno}",
                )
            try:
                values = np.array(tokens, dtype=np.float64)
            except ValueError as exc:
                raise FormatError(f"{path}: {exc}", f"line {lineno}") from None
            label = values[0]
            if label != int(label):
                raise FormatError(f"{path}: non-integer label {tokens[0]}", f"line {lineno}")
            labels.append(int(label))
            images.append(values[1:].reshape(16, 16))
    if not images:
        return np.zeros((0, 16, 16)), np.zeros(0, dtype=np.int64)
    return np.stack(images), np.array(labels, dtype=np.int64)


def load_generic(path):
    """``.npz`` archive with ``X`` (count x n_features) and integer ``y``."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        with np.load(path, allow_pickle=False) as archive:
            X, y = archive["X"], archive["y"]
    except (KeyError, ValueError, OSError) as exc:
        raise FormatError(f"{path}: not a generic-binary archive ({exc})") from None
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise FormatError(f"{path}: X {X.shape} and y {y.shape} are inconsistent")
    return X.astype(np.float64), y.astype(np.int64)


def make_synthetic(seed=0, n_features=20, n_classes=3, atoms_per_class=8, sparsity=3,
                   n_train=300, n_test=300, noise=0.01):
    """Union-of-subspaces classification fixture with known ground truth.

    Each class owns an orthonormal block of ``atoms_per_class`` atoms; a
    sample combines ``sparsity`` atoms of its class with coefficients drawn
    uniformly from [0.5, 1.5], is scaled to unit norm, and gets Gaussian noise
    with total norm about ``noise``.  Coefficients are positive so that class
    evidence adds up under a linear classifier.

    Returns ``(train_X, train_y, test_X, test_y, truth)`` with signals in
    rows; ``truth`` holds the generating dictionary and atom-to-class map.
    """
    rng = np.random.default_rng(seed)
    blocks = [np.linalg.qr(rng.standard_normal((n_features, atoms_per_class)))[0]
              for _ in range(n_classes)]
    D_true = np.hstack(blocks)
    atom_class = np.repeat(np.arange(n_classes), atoms_per_class)

    def draw(count):
        labels = rng.permutation(np.arange(count) % n_classes)
        X = np.empty((count, n_features))
        for i, c in enumerate(labels):
            idx = rng.choice(atoms_per_class, size=sparsity, replace=False)
            coef = rng.uniform(0.5, 1.5, sparsity)
            x = blocks[c][:, idx] @ coef
            x /= np.linalg.norm(x)
            X[i] = x + noise / np.sqrt(n_features) * rng.standard_normal(n_features)
        return X, labels

    train_X, train_y = draw(n_train)
    test_X, test_y = draw(n_test)
    truth = {"dictionary": D_true, "atom_class": atom_class}
    return train_X, train_y, test_X, test_y, truth


@dataclass
class DatasetManifest:
    name: str
    format: str
    paths: dict
    classes: int
    options: dict = field(default_factory=dict)
    root: Path = Path(".")

    def path(self, key):
        if key not in self.paths:
            raise ConfigError(f"manifest {self.name!r} has no path {key!r}")
        p = Path(self.paths[key])
        return p if p.is_absolute() else self.root / p


_MANIFEST_KEYS = {"name", "format", "paths", "classes", "options"}
_REQUIRED_PATHS = {
    "idx": ("train_images", "train_labels", "test_images", "test_labels"),
    "usps-text": ("train", "test"),
    "generic-binary": ("train", "test"),
    "synthetic": (),
}


def load_manifest(path):
    """Read a JSON manifest; relative data paths resolve against its folder."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid manifest JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: manifest must be a JSON object")
    unknown = set(raw) - _MANIFEST_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown manifest keys {sorted(unknown)}")
    fmt = raw.get("format")
    if fmt not in FORMATS:
        raise ConfigError(f"{path}: format must be one of {FORMATS}, got {fmt!r}")
    paths = raw.get("paths", {})
    missing = [k for k in _REQUIRED_PATHS[fmt] if k not in paths]
    if missing:
        raise ConfigError(f"{path}: format {fmt} needs paths {missing}")
    classes = raw.get("classes")
    if not isinstance(classes, int) or classes < 1:
        raise ConfigError(f"{path}: 'classes' must be a positive integer")
    return DatasetManifest(raw.get("name", path.stem), fmt, dict(paths), classes,
                           dict(raw.get("options", {})), path.parent)


def _finish(name, images_or_rows, labels, n_classes):
    arr = np.asarray(images_or_rows, dtype=np.float64)
    image_shape = tuple(arr.shape[1:]) if arr.ndim == 3 else None
    rows = arr.reshape(arr.shape[0], -1)
    if rows.shape[0] == 0:
        X, degenerate = rows, np.zeros(0, dtype=bool)
    else:
        X, degenerate = normalize(rows)
    return Dataset(X, labels, n_classes, degenerate, image_shape, name)


def load_split(manifest, split):
    """Load and normalize the ``train`` or ``test`` split of a manifest."""
    if split not in ("train", "test"):
        raise ConfigError(f"split must be 'train' or 'test', got {split!r}")
    fmt = manifest.format
    if fmt == "idx":
        images = load_idx(manifest.path(f"{split}_images"))
        labels = load_idx(manifest.path(f"{split}_labels"))
        if images.ndim != 3 or labels.ndim != 1 or images.shape[0] != labels.shape[0]:
            raise FormatError(
                f"{manifest.name}: {images.shape[0]} images but {labels.shape[0]} labels"
            )
        return _finish(manifest.name, images, labels, manifest.classes)
    if fmt == "usps-text":
        images, labels = load_usps(manifest.path(split))
        return _finish(manifest.name, images, labels, manifest.classes)
    if fmt == "generic-binary":
        X, y = load_generic(manifest.path(split))
        shape = manifest.options.get("image_shape")
        ds = _finish(manifest.name, X, y, manifest.classes)
        ds.image_shape = tuple(shape) if shape else None
        return ds
    opts = manifest.options
    train_X, train_y, test_X, test_y, _ = make_synthetic(
        seed=int(opts.get("seed", 0)), n_classes=manifest.classes,
        n_train=int(opts.get("n_train", 300)), n_test=int(opts.get("n_test", 300)),
    )
    if split == "train":
        return _finish(manifest.name, train_X, train_y, manifest.classes)
    return _finish(manifest.name, test_X, test_y, manifest.classes)
