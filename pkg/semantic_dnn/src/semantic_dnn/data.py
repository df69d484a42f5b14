"""Bundled handwritten-digit dataset with a deterministic stratified split."""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass

import numpy as np

TEST_FRACTION = 0.15


@dataclass(frozen=True)
class Dataset:
    train_images: np.ndarray  # (N, 784) float32 in [0, 1]
    train_labels: np.ndarray  # (N,) int64
    test_images: np.ndarray
    test_labels: np.ndarray

    @property
    def class_count(self) -> int:
        return int(self.train_labels.max()) + 1


def _raw_arrays() -> tuple[np.ndarray, np.ndarray]:
    ref = importlib.resources.files("semantic_dnn") / "data" / "digits.npz"
    with importlib.resources.as_file(ref) as path:
        with np.load(path) as z:
            images = z["images"]
            labels = z["labels"]
    if images.ndim != 2 or images.shape[1] != 784 or images.shape[0] != labels.size:
        raise RuntimeError("bundled digit archive is corrupt")
    return images, labels


def load_dataset(seed: int = 0, test_fraction: float = TEST_FRACTION) -> Dataset:
    """Stratified train/test split of the bundled 10,000-image digit set."""
    images, labels = _raw_arrays()
    rng = np.random.default_rng(seed ^ 0x5EED)
    train_idx, test_idx = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(idx.size)]
        cut = max(1, int(round(idx.size * test_fraction)))
        test_idx.append(idx[:cut])
        train_idx.append(idx[cut:])
    train = np.concatenate(train_idx)
    test = np.concatenate(test_idx)
    # fixed shuffle so batches mix classes
    train = train[rng.permutation(train.size)]
    test = test[rng.permutation(test.size)]
    to_f = lambda a: (a.astype(np.float32) / 255.0)
    return Dataset(
        train_images=to_f(images[train]), train_labels=labels[train].astype(np.int64),
        test_images=to_f(images[test]), test_labels=labels[test].astype(np.int64))
