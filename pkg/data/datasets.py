"""
datasets.py - Dataset preparation: class filtering, 4x4 downsampling, angle scaling.

    mnist2    MNIST digits 3, 6
    mnist4    MNIST digits 0, 3, 6, 9
    fashion2  Fashion-MNIST dress, shirt (3, 6)
    fashion4  Fashion-MNIST t-shirt, dress, shirt, ankle boot (0, 3, 6, 9)
    synth2/4  seeded Gaussian blobs, no files needed

IDX files are looked up in <data_dir>/mnist/ and <data_dir>/fashion/
(falling back to <data_dir> itself), plain or gzip-compressed.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np

from data.idx import FormatError, IoError, read_idx
from settings import (
    DATA_FEATURES, DATASETS, DOWNSAMPLED_SIDE, EVAL_CAP, IDX_FILES, IMAGE_SIDE,
    PIXEL_MAX, SYNTH_SPREAD, SYNTH_TEST_SIZE, SYNTH_TRAIN_SIZE,
)
from utils.base_path import resolve_data_dir
from utils.helpers import derive_seed

log = logging.getLogger("splitq.data")


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray        # (N, 16) angles in [0, pi]
    labels: np.ndarray          # (N,) ints in [0, n_classes)
    n_classes: int
    split: str = "train"
    name: str = ""

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[1] != DATA_FEATURES:
            raise ValueError(f"features must be (N, {DATA_FEATURES}), got {self.features.shape}")
        if len(self.features) != len(self.labels):
            raise ValueError(f"{len(self.features)} feature rows vs {len(self.labels)} labels")

    def __len__(self):
        return len(self.labels)

    def head(self, n: int) -> "Dataset":
        return Dataset(self.features[:n], self.labels[:n], self.n_classes, self.split, self.name)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


def downsample(images: np.ndarray, side: int = DOWNSAMPLED_SIDE) -> np.ndarray:
    """(N, 28, 28) -> (N, side, side) by block mean."""
    n, h, w = images.shape
    if h % side or w % side:
        raise ValueError(f"{h}x{w} images do not split into {side}x{side} blocks")
    blocks = images.reshape(n, side, h // side, side, w // side).astype(float)
    return blocks.mean(axis=(2, 4))


def images_to_features(images: np.ndarray) -> np.ndarray:
    """Block means scaled linearly from [0, 255] to [0, pi], flattened row-major."""
    small = downsample(images)
    return (small.reshape(len(images), -1) / PIXEL_MAX) * np.pi


def filter_classes(labels: np.ndarray, classes) -> tuple[np.ndarray, np.ndarray]:
    """Indices of the kept samples (original order) and their dense labels."""
    classes = sorted(int(c) for c in classes)
    keep = np.flatnonzero(np.isin(labels, classes))
    remap = {c: i for i, c in enumerate(classes)}
    dense = np.array([remap[int(v)] for v in labels[keep]], dtype=np.int64)
    return keep, dense


def _find_source_dir(data_dir: str, source: str) -> str:
    nested = os.path.join(data_dir, source)
    return nested if os.path.isdir(nested) else data_dir


def load_split(data_dir: str, source: str, split: str, classes, name: str = "") -> Dataset:
    images_file, labels_file = IDX_FILES[split]
    base = _find_source_dir(data_dir, source)
    images = read_idx(os.path.join(base, images_file))
    labels = read_idx(os.path.join(base, labels_file))
    if images.ndim != 3 or images.shape[1:] != (IMAGE_SIDE, IMAGE_SIDE) or labels.ndim != 1:
        raise FormatError(f"unexpected IDX shapes {images.shape} / {labels.shape}")
    if len(images) != len(labels):
        raise FormatError(f"{len(images)} images but {len(labels)} labels in {base}")
    keep, dense = filter_classes(labels, classes)
    features = images_to_features(images[keep])
    log.info("%s %s: %d samples", name or source, split, len(dense))
    return Dataset(features, dense, len(classes), split, name)


def synth(n_classes: int, seed: int = 0, name: str = "") -> tuple[Dataset, Dataset]:
    """Gaussian blobs around per-class centres drawn in [0.3, pi-0.3]^16."""
    centres = np.random.default_rng(derive_seed(seed, 0)).uniform(0.3, np.pi - 0.3, (n_classes, DATA_FEATURES))

    def draw(size, stream, split):
        rng = np.random.default_rng(derive_seed(seed, stream))
        labels = np.arange(size) % n_classes
        rng.shuffle(labels)
        feats = centres[labels] + rng.normal(0.0, SYNTH_SPREAD, (size, DATA_FEATURES))
        return Dataset(np.clip(feats, 0.0, np.pi), labels.astype(np.int64), n_classes, split, name)

    return draw(SYNTH_TRAIN_SIZE, 1, "train"), draw(SYNTH_TEST_SIZE, 2, "test")


def prepare(name: str, data_dir: str | None = None, seed: int = 0) -> tuple[Dataset, Dataset]:
    """(train, test) for a named dataset; test keeps its first EVAL_CAP samples."""
    if name not in DATASETS:
        raise ValueError(f"unknown dataset {name!r}; choose from {sorted(DATASETS)}")
    source, classes = DATASETS[name]
    if source == "synth":
        train, test = synth(len(classes), seed, name)
    else:
        root = resolve_data_dir(data_dir)
        if not os.path.isdir(root):
            raise IoError(f"data directory {root} does not exist")
        train = load_split(root, source, "train", classes, name)
        test = load_split(root, source, "test", classes, name)
    return train, test.head(EVAL_CAP)
