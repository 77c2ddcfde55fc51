"""
test_data.py - IDX parsing and dataset preparation.
"""

import gzip
import os
import struct

import numpy as np
import pytest
from numpy.testing import assert_allclose

from data.datasets import downsample, filter_classes, images_to_features, prepare
from data.idx import FormatError, IoError, pack_idx, parse_idx, read_idx
from settings import IDX_FILES
from utils.base_path import resolve_data_dir


def _labels_blob(values):
    return bytes([0, 0, 8, 1]) + struct.pack("!I", len(values)) + bytes(values)


# ── parse_idx ──

def test_parse_labels():
    assert parse_idx(_labels_blob([3, 6])).tolist() == [3, 6]


def test_parse_one_image():
    blob = struct.pack("!IIII", 0x803, 1, 28, 28) + bytes(range(256)) * 3 + bytes(16)
    img = parse_idx(blob)
    assert img.shape == (1, 28, 28)
    assert img[0, 0, 1] == 1


def test_truncated_payload():
    with pytest.raises(FormatError):
        parse_idx(_labels_blob([3, 6])[:-1])


def test_truncated_header():
    with pytest.raises(FormatError):
        parse_idx(struct.pack("!II", 0x803, 1))


def test_bad_magic():
    with pytest.raises(FormatError):
        parse_idx(struct.pack("!II", 0x802, 0))


def test_read_gzip(tmp_path):
    raw = pack_idx(np.array([1, 2, 3], dtype=np.uint8))
    path = tmp_path / "labels"
    with gzip.open(str(path) + ".gz", "wb") as f:
        f.write(raw)
    assert read_idx(str(path)).tolist() == [1, 2, 3]
    with pytest.raises(IoError):
        read_idx(str(tmp_path / "nope"))


# ── Downsampling and scaling ──

def test_zero_and_full_images():
    imgs = np.stack([np.zeros((28, 28)), np.full((28, 28), 255)]).astype(np.uint8)
    feats = images_to_features(imgs)
    assert feats.shape == (2, 16)
    assert_allclose(feats[0], 0.0)
    assert_allclose(feats[1], np.pi, atol=1e-9)


def test_downsample_preserves_mean(rng):
    imgs = rng.integers(0, 256, (5, 28, 28)).astype(np.uint8)
    small = downsample(imgs)
    assert_allclose(small.mean(axis=(1, 2)), imgs.mean(axis=(1, 2)), atol=1e-9)


def test_downsample_block_layout():
    img = np.zeros((1, 28, 28), dtype=np.uint8)
    img[0, :7, 21:] = 255           # top-right block
    feats = images_to_features(img)[0]
    assert_allclose(feats[3], np.pi)
    assert_allclose(np.delete(feats, 3), 0.0)


def test_filter_keeps_order_and_remaps():
    labels = np.array([6, 1, 3, 3, 9, 6, 0])
    keep, dense = filter_classes(labels, (3, 6))
    assert keep.tolist() == [0, 2, 3, 5]
    assert dense.tolist() == [1, 0, 0, 1]


# ── prepare ──

def _write_fake_mnist(root, n_train=40, n_test=400, seed=0):
    rng = np.random.default_rng(seed)
    os.makedirs(root / "mnist")
    for split, n in (("train", n_train), ("test", n_test)):
        imgs = rng.integers(0, 256, (n, 28, 28)).astype(np.uint8)
        labels = (np.arange(n) % 10).astype(np.uint8)
        img_name, lbl_name = IDX_FILES[split]
        (root / "mnist" / img_name).write_bytes(pack_idx(imgs))
        (root / "mnist" / lbl_name).write_bytes(pack_idx(labels))


def test_prepare_from_idx_files(tmp_path):
    _write_fake_mnist(tmp_path)
    train, test = prepare("mnist4", str(tmp_path))
    assert train.n_classes == 4 and len(train) == 16
    assert set(train.labels.tolist()) == {0, 1, 2, 3}
    assert len(test) == 160 <= 300
    assert train.features.min() >= 0 and train.features.max() <= np.pi


def test_prepare_caps_test_split(tmp_path):
    _write_fake_mnist(tmp_path, n_test=2000)
    _, test = prepare("mnist2", str(tmp_path))
    assert len(test) == 300


def test_prepare_missing_files(tmp_path):
    with pytest.raises(IoError):
        prepare("fashion2", str(tmp_path))


def test_synth_is_seeded():
    a_train, a_test = prepare("synth4", seed=9)
    b_train, _ = prepare("synth4", seed=9)
    c_train, _ = prepare("synth4", seed=10)
    assert np.array_equal(a_train.features, b_train.features)
    assert not np.array_equal(a_train.features, c_train.features)
    assert len(a_test) <= 300
    assert a_train.class_counts().tolist() == [100] * 4
    assert a_train.features.min() >= 0 and a_train.features.max() <= np.pi


def test_data_dir_precedence(monkeypatch, tmp_path):
    monkeypatch.delenv("SPLITQ_DATA_DIR", raising=False)
    monkeypatch.setenv("QUMOS_DATA_DIR", str(tmp_path / "env"))
    assert resolve_data_dir(str(tmp_path / "flag"), "cfg") == str(tmp_path / "flag")
    assert resolve_data_dir(None, "cfg") == str(tmp_path / "env")
    monkeypatch.setenv("SPLITQ_DATA_DIR", str(tmp_path / "alias"))
    assert resolve_data_dir(None, "cfg") == str(tmp_path / "env")
    monkeypatch.delenv("QUMOS_DATA_DIR")
    assert resolve_data_dir(None, "cfg") == str(tmp_path / "alias")
    monkeypatch.delenv("SPLITQ_DATA_DIR")
    assert resolve_data_dir(None, str(tmp_path / "cfg")) == str(tmp_path / "cfg")
