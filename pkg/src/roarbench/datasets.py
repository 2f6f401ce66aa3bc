"""Image dataset ingestion: IDX (big-endian) reading and writing, [0,1]
normalization, per-channel means, and a synthetic oriented-bar generator so
experiments need no downloads."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .nn import ArrayDataset

IDX_UBYTE = 0x08


class IdxFormatError(ValueError):
    pass


@dataclass
class NormalizationRecord:
    scale: float  # raw = normalized * scale + offset
    offset: float = 0.0

    def invert(self, normalized: np.ndarray) -> np.ndarray:
        return normalized * self.scale + self.offset


@dataclass
class ImageDataset:
    train_x: np.ndarray  # (n, H*W*C) in [0, 1]
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    image_shape: tuple[int, int, int]  # (H, W, C)
    n_classes: int
    normalization: NormalizationRecord

    def as_dataset(self) -> ArrayDataset:
        return ArrayDataset(self.train_x, self.train_y,
                            self.test_x, self.test_y)


def read_idx(path: str) -> np.ndarray:
    """Parse one IDX file (unsigned-byte payload, any dimensionality)."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 4:
        raise IdxFormatError(f"{path}: truncated header ({len(data)} bytes)")
    zero1, zero2, dtype, ndim = struct.unpack(">BBBB", data[:4])
    if zero1 != 0 or zero2 != 0 or dtype != IDX_UBYTE:
        raise IdxFormatError(
            f"{path}: bad magic bytes {data[:4].hex()} (expect 0000 08 nn)")
    header_len = 4 + 4 * ndim
    if len(data) < header_len:
        raise IdxFormatError(f"{path}: truncated dimension table")
    dims = struct.unpack(f">{ndim}I", data[4:header_len])
    expected = int(np.prod(dims)) + header_len
    if len(data) != expected:
        raise IdxFormatError(
            f"{path}: expected {expected} bytes, found {len(data)}")
    return np.frombuffer(data, dtype=np.uint8, offset=header_len).reshape(dims)


def write_idx(path: str, array: np.ndarray):
    array = np.ascontiguousarray(array, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">BBBB", 0, 0, IDX_UBYTE, array.ndim))
        f.write(struct.pack(f">{array.ndim}I", *array.shape))
        f.write(array.tobytes())


def load_idx(images_path: str, labels_path: str) -> tuple[np.ndarray, np.ndarray]:
    """Read an IDX image/label file pair; grayscale images get C = 1."""
    images = read_idx(images_path)
    labels = read_idx(labels_path)
    if images.ndim == 3:
        images = images[:, :, :, None]
    if images.ndim != 4:
        raise IdxFormatError(
            f"{images_path}: expected 3 or 4 dimensions, found {images.ndim}")
    if labels.ndim != 1:
        raise IdxFormatError(f"{labels_path}: labels must be 1-dimensional")
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"{images.shape[0]} images vs {labels.shape[0]} labels")
    return images, labels


def make_image_dataset(train_images: np.ndarray, train_labels: np.ndarray,
                       test_images: np.ndarray, test_labels: np.ndarray
                       ) -> ImageDataset:
    """Flatten uint8 image stacks and normalize to [0, 1]."""
    shape = tuple(train_images.shape[1:])
    record = NormalizationRecord(scale=255.0)
    n_classes = int(max(train_labels.max(), test_labels.max())) + 1
    return ImageDataset(
        train_x=train_images.reshape(len(train_images), -1) / record.scale,
        train_y=train_labels.astype(np.int64),
        test_x=test_images.reshape(len(test_images), -1) / record.scale,
        test_y=test_labels.astype(np.int64),
        image_shape=shape,
        n_classes=n_classes,
        normalization=record,
    )


def load_idx_dataset(train_images_path, train_labels_path,
                     test_images_path, test_labels_path) -> ImageDataset:
    return make_image_dataset(*load_idx(train_images_path, train_labels_path),
                              *load_idx(test_images_path, test_labels_path))


def channel_means(dataset: ImageDataset) -> np.ndarray:
    """Mean over all train pixels, one value per channel."""
    if dataset.train_x.shape[0] == 0:
        raise ValueError("empty train split")
    h, w, c = dataset.image_shape
    return dataset.train_x.reshape(-1, h * w, c).mean(axis=(0, 1))


def generate_bars(n_train: int, n_test: int, size: int = 12,
                  noise: float = 0.1, seed: int = 0) -> ImageDataset:
    """Two-class oriented-bar images: one bright horizontal (class 0) or
    vertical (class 1) bar at a random position, plus clipped Gaussian noise.
    """
    rng = np.random.default_rng(np.uint64(seed))

    def batch(n):
        images = np.zeros((n, size, size))
        labels = rng.integers(0, 2, size=n)
        positions = rng.integers(0, size, size=n)
        intensity = rng.uniform(0.6, 1.0, size=n)
        for i in range(n):
            if labels[i] == 0:
                images[i, positions[i], :] = intensity[i]
            else:
                images[i, :, positions[i]] = intensity[i]
        images = np.clip(images + rng.normal(0, noise, images.shape), 0, 1)
        return images, labels.astype(np.int64)

    train_images, train_labels = batch(n_train)
    test_images, test_labels = batch(n_test)
    return ImageDataset(
        train_x=train_images.reshape(n_train, -1),
        train_y=train_labels,
        test_x=test_images.reshape(n_test, -1),
        test_y=test_labels,
        image_shape=(size, size, 1),
        n_classes=2,
        normalization=NormalizationRecord(scale=1.0),
    )
