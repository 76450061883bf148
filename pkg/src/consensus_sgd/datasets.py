"""Synthetic classification data and IDX (MNIST-style) file I/O."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.datasets import make_classification
from sklearn.model_selection import train_test_split

__all__ = ["Dataset", "synthetic_classification", "read_idx", "write_idx", "load_idx_pair"]

# IDX type codes -> numpy big-endian dtypes.
_IDX_TYPES = {
    0x08: np.dtype(">u1"),
    0x09: np.dtype(">i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}
_IDX_CODES = {v.newbyteorder(">"): k for k, v in _IDX_TYPES.items()}


@dataclass(frozen=True)
class Dataset:
    """Train/test split with integer class labels."""

    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray

    @property
    def n_features(self) -> int:
        return self.X_train.shape[1]


def synthetic_classification(
    n_samples: int = 500,
    n_features: int = 5,
    n_classes: int = 2,
    class_sep: float = 1.0,
    flip_y: float = 0.02,
    test_fraction: float = 0.2,
    seed: int = 0,
) -> Dataset:
    """Gaussian-cluster classification data, standardised on the training split."""
    X, y = make_classification(
        n_samples=n_samples,
        n_features=n_features,
        n_informative=min(n_features, max(2, n_classes)),
        n_redundant=0,
        n_classes=n_classes,
        n_clusters_per_class=1,
        class_sep=class_sep,
        flip_y=flip_y,
        random_state=seed,
    )
    X_tr, X_te, y_tr, y_te = train_test_split(X, y, test_size=test_fraction, random_state=seed, stratify=y)
    mean, std = X_tr.mean(axis=0), X_tr.std(axis=0)
    std[std == 0] = 1.0
    return Dataset((X_tr - mean) / std, y_tr, (X_te - mean) / std, y_te)


def _open(path, mode):
    path = Path(path)
    return gzip.open(path, mode) if path.suffix == ".gz" else open(path, mode)


def read_idx(path) -> np.ndarray:
    """Read an IDX file (optionally gzipped) into an array of its stored shape."""
    with _open(path, "rb") as fh:
        header = fh.read(4)
        if len(header) != 4 or header[0] != 0 or header[1] != 0:
            raise ValueError(f"{path}: not an IDX file (bad magic)")
        code, ndim = header[2], header[3]
        if code not in _IDX_TYPES:
            raise ValueError(f"{path}: unknown IDX type code 0x{code:02x}")
        dims = struct.unpack(f">{ndim}I", fh.read(4 * ndim))
        dtype = _IDX_TYPES[code]
        count = int(np.prod(dims)) if dims else 1
        data = np.frombuffer(fh.read(count * dtype.itemsize), dtype=dtype)
    if data.size != count:
        raise ValueError(f"{path}: truncated IDX payload ({data.size} of {count} values)")
    return data.reshape(dims).astype(dtype.newbyteorder("="))


def write_idx(array, path) -> None:
    array = np.asarray(array)
    dtype = array.dtype.newbyteorder(">")
    if dtype not in _IDX_CODES:
        raise ValueError(f"dtype {array.dtype} has no IDX type code")
    header = bytes([0, 0, _IDX_CODES[dtype], array.ndim]) + struct.pack(f">{array.ndim}I", *array.shape)
    with _open(path, "wb") as fh:
        fh.write(header + array.astype(dtype).tobytes())


def load_idx_pair(images_path, labels_path, classes=None, max_samples=None, test_fraction=0.2, seed=0) -> Dataset:
    """Images and labels from IDX files, flattened and scaled to [0, 1].

    ``classes`` keeps only the listed labels (e.g. ``(0, 1)`` for a binary task).
    """
    X = read_idx(images_path).astype(float)
    y = read_idx(labels_path).astype(int)
    if X.shape[0] != y.shape[0]:
        raise ValueError("image and label files disagree on the sample count")
    X = X.reshape(X.shape[0], -1)
    if X.max() > 1.0:
        X = X / 255.0
    if classes is not None:
        keep = np.isin(y, classes)
        X, y = X[keep], y[keep]
    if max_samples is not None:
        X, y = X[:max_samples], y[:max_samples]
    X_tr, X_te, y_tr, y_te = train_test_split(X, y, test_size=test_fraction, random_state=seed, stratify=y)
    return Dataset(X_tr, y_tr, X_te, y_te)
