"""MNIST IDX ingestion and id-stable dataset manipulation.

Images are normalized to [0, 1] and zero-padded from 28x28 to 32x32 at load
time so the network geometry (32 -> 28 -> 14 -> 10 -> 5 -> 1) holds. Every
example keeps the index it had in the source file as a stable id, so
deletions never shift the meaning of later ids.
"""

import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import IdxFormatError, ValidationError

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049

TRAIN_IMAGES = "train-images-idx3-ubyte"
TRAIN_LABELS = "train-labels-idx1-ubyte"
TEST_IMAGES = "t10k-images-idx3-ubyte"
TEST_LABELS = "t10k-labels-idx1-ubyte"


@dataclass
class LabeledDataset:
    """Images [N,32,32,1] in [0,1], one-hot labels [N,10], stable ids [N]."""

    images: np.ndarray
    labels: np.ndarray
    ids: np.ndarray

    def __post_init__(self):
        if not (len(self.images) == len(self.labels) == len(self.ids)):
            raise ValidationError(
                f"leading dimensions differ: images {len(self.images)}, "
                f"labels {len(self.labels)}, ids {len(self.ids)}"
            )

    def __len__(self) -> int:
        return len(self.ids)

    def digits(self) -> np.ndarray:
        """Integer class labels, decoded from the one-hot rows."""
        return self.labels.argmax(axis=1)


def _read_be_u32(f, path: str) -> int:
    raw = f.read(4)
    if len(raw) != 4:
        raise IdxFormatError(f"{path}: truncated header")
    return struct.unpack(">I", raw)[0]


def read_idx_images(path: str) -> np.ndarray:
    """Raw uint8 images [N, rows, cols] from an IDX3 file."""
    if not os.path.exists(path):
        raise IdxFormatError(f"missing IDX file: {path}")
    with open(path, "rb") as f:
        magic = _read_be_u32(f, path)
        if magic != IMAGE_MAGIC:
            raise IdxFormatError(f"{path}: bad image magic {magic}, expected {IMAGE_MAGIC}")
        count = _read_be_u32(f, path)
        rows = _read_be_u32(f, path)
        cols = _read_be_u32(f, path)
        payload = f.read(count * rows * cols)
    if len(payload) != count * rows * cols:
        raise IdxFormatError(
            f"{path}: expected {count * rows * cols} pixel bytes, got {len(payload)}"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(count, rows, cols)


def read_idx_labels(path: str) -> np.ndarray:
    """Raw uint8 labels [N] from an IDX1 file."""
    if not os.path.exists(path):
        raise IdxFormatError(f"missing IDX file: {path}")
    with open(path, "rb") as f:
        magic = _read_be_u32(f, path)
        if magic != LABEL_MAGIC:
            raise IdxFormatError(f"{path}: bad label magic {magic}, expected {LABEL_MAGIC}")
        count = _read_be_u32(f, path)
        payload = f.read(count)
    if len(payload) != count:
        raise IdxFormatError(f"{path}: expected {count} label bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype=np.uint8)


def write_idx_images(path: str, images: np.ndarray) -> None:
    """Write uint8 images [N, rows, cols] in IDX3 format."""
    n, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", IMAGE_MAGIC, n, rows, cols))
        f.write(np.ascontiguousarray(images, dtype=np.uint8).tobytes())


def write_idx_labels(path: str, labels: np.ndarray) -> None:
    """Write uint8 labels [N] in IDX1 format."""
    with open(path, "wb") as f:
        f.write(struct.pack(">II", LABEL_MAGIC, len(labels)))
        f.write(np.ascontiguousarray(labels, dtype=np.uint8).tobytes())


def _to_dataset(images_u8: np.ndarray, labels_u8: np.ndarray, path_hint: str) -> LabeledDataset:
    if len(images_u8) != len(labels_u8):
        raise IdxFormatError(
            f"{path_hint}: image count {len(images_u8)} != label count {len(labels_u8)}"
        )
    if labels_u8.size and labels_u8.max() > 9:
        raise IdxFormatError(f"{path_hint}: label byte out of range 0..9")
    n = len(images_u8)
    norm = images_u8.astype(np.float32) / np.float32(255.0)
    padded = np.zeros((n, 32, 32, 1), dtype=np.float32)
    padded[:, 2:30, 2:30, 0] = norm
    onehot = np.zeros((n, 10), dtype=np.float32)
    onehot[np.arange(n), labels_u8] = 1.0
    return LabeledDataset(images=padded, labels=onehot, ids=np.arange(n, dtype=np.uint64))


def load_mnist(data_dir: str) -> tuple[LabeledDataset, LabeledDataset]:
    """Load the four canonical IDX files from a directory."""
    train = _to_dataset(
        read_idx_images(os.path.join(data_dir, TRAIN_IMAGES)),
        read_idx_labels(os.path.join(data_dir, TRAIN_LABELS)),
        data_dir,
    )
    test = _to_dataset(
        read_idx_images(os.path.join(data_dir, TEST_IMAGES)),
        read_idx_labels(os.path.join(data_dir, TEST_LABELS)),
        data_dir,
    )
    return train, test


def subset(ds: LabeledDataset, n: int, seed: int) -> LabeledDataset:
    """Seeded uniform sample of n examples without replacement; ids kept."""
    if not 1 <= n <= len(ds):
        raise ValidationError(f"subset size {n} not in 1..{len(ds)}")
    pick = np.random.default_rng(seed).choice(len(ds), size=n, replace=False)
    return LabeledDataset(images=ds.images[pick], labels=ds.labels[pick], ids=ds.ids[pick])


def remove_by_id(ds: LabeledDataset, ids_to_remove) -> LabeledDataset:
    """Drop the named examples, preserving the order of the survivors."""
    drop = set(int(i) for i in ids_to_remove)
    present = set(int(i) for i in ds.ids)
    unknown = drop - present
    if unknown:
        raise ValidationError(f"unknown ids in removal set: {sorted(unknown)[:10]}")
    keep = np.array([int(i) not in drop for i in ds.ids], dtype=bool)
    return LabeledDataset(images=ds.images[keep], labels=ds.labels[keep], ids=ds.ids[keep])
