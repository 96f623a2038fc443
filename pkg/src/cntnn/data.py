"""Dataset ingestion (MNIST IDX, CIFAR-10 binary), a synthetic cluster
generator for fast tests, deterministic input sampling, and npz round-trip.

Loaders never download. Missing files raise with the expected filenames so
the caller knows what to place under the data root.
"""

import gzip
import os
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError, SpecError

SPLITS = ("train", "test")


@dataclass
class Dataset:
    """Immutable-by-convention input matrix plus optional labels.

    inputs are [count, feature_dim] float64 in [0,1]. image_shape records
    the spatial layout (channels, height, width) when the rows are images,
    None otherwise; conv and recurrent networks use it to unflatten.
    """

    inputs: np.ndarray
    labels: np.ndarray | None
    name: str
    split: str
    image_shape: tuple | None = None

    @property
    def count(self):
        return self.inputs.shape[0]

    @property
    def feature_dim(self):
        return self.inputs.shape[1]

    def validate(self, class_count=None):
        if self.split not in SPLITS:
            raise SpecError(f"split must be one of {SPLITS}, got {self.split!r}")
        if self.inputs.ndim != 2:
            raise DataFormatError(f"inputs must be [count, feature_dim], got shape {self.inputs.shape}")
        if not np.all(np.isfinite(self.inputs)):
            raise DataFormatError(f"dataset {self.name!r} contains non-finite inputs")
        if self.inputs.size and (self.inputs.min() < 0.0 or self.inputs.max() > 1.0):
            raise DataFormatError(f"dataset {self.name!r} has inputs outside [0,1]")
        if self.labels is not None:
            if len(self.labels) != self.count:
                raise DataFormatError(
                    f"dataset {self.name!r}: {len(self.labels)} labels for {self.count} inputs"
                )
            if class_count is not None and self.labels.size:
                lo, hi = int(self.labels.min()), int(self.labels.max())
                if lo < 0 or hi >= class_count:
                    raise DataFormatError(
                        f"dataset {self.name!r}: labels span [{lo},{hi}], expected [0,{class_count})"
                    )
        if self.image_shape is not None:
            c, h, w = self.image_shape
            if c * h * w != self.feature_dim:
                raise DataFormatError(
                    f"image_shape {self.image_shape} does not match feature_dim {self.feature_dim}"
                )
        return self


@dataclass
class SampleBatch:
    """Rows drawn without replacement from a dataset, with provenance."""

    inputs: np.ndarray
    indices: np.ndarray
    seed: int
    image_shape: tuple | None = None


def _read_bytes(path):
    if not os.path.exists(path):
        raise DataFormatError(f"file not found: {path}")
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rb") as fh:
        return fh.read()


def _be_u32(buf, offset, path):
    if len(buf) < offset + 4:
        raise DataFormatError(f"{path}: truncated at byte {len(buf)}, header needs {offset + 4} bytes")
    return int.from_bytes(buf[offset : offset + 4], "big")


def load_mnist(images_path, labels_path, split="train") -> Dataset:
    """Parse the IDX pair (magics 2051/2049, big-endian). Accepts .gz files."""
    if split not in SPLITS:
        raise SpecError(f"split must be one of {SPLITS}, got {split!r}")
    ibuf = _read_bytes(images_path)
    magic = _be_u32(ibuf, 0, images_path)
    if magic != 2051:
        raise DataFormatError(f"{images_path}: bad magic, expected 2051, found {magic}")
    count = _be_u32(ibuf, 4, images_path)
    rows = _be_u32(ibuf, 8, images_path)
    cols = _be_u32(ibuf, 12, images_path)
    if (rows, cols) != (28, 28):
        raise DataFormatError(f"{images_path}: expected 28x28 images, found {rows}x{cols}")
    need = 16 + count * rows * cols
    if len(ibuf) < need:
        raise DataFormatError(f"{images_path}: truncated at byte {len(ibuf)}, expected {need} bytes")
    pixels = np.frombuffer(ibuf, dtype=np.uint8, count=count * 784, offset=16)
    inputs = pixels.reshape(count, 784).astype(np.float64) / 255.0

    lbuf = _read_bytes(labels_path)
    magic = _be_u32(lbuf, 0, labels_path)
    if magic != 2049:
        raise DataFormatError(f"{labels_path}: bad magic, expected 2049, found {magic}")
    lcount = _be_u32(lbuf, 4, labels_path)
    if lcount != count:
        raise DataFormatError(
            f"label count {lcount} in {labels_path} does not match image count {count}"
        )
    need = 8 + lcount
    if len(lbuf) < need:
        raise DataFormatError(f"{labels_path}: truncated at byte {len(lbuf)}, expected {need} bytes")
    labels = np.frombuffer(lbuf, dtype=np.uint8, count=lcount, offset=8).astype(np.int64)
    ds = Dataset(inputs, labels, "mnist", split, image_shape=(1, 28, 28))
    return ds.validate(class_count=10)


def load_cifar10(batch_paths, split="train") -> Dataset:
    """Parse CIFAR-10 binary batches: 3073-byte records, channel-major pixels."""
    if split not in SPLITS:
        raise SpecError(f"split must be one of {SPLITS}, got {split!r}")
    if isinstance(batch_paths, (str, os.PathLike)):
        batch_paths = [batch_paths]
    if not batch_paths:
        raise SpecError("load_cifar10 needs at least one batch file")
    chunks, label_chunks = [], []
    for path in batch_paths:
        buf = _read_bytes(path)
        if len(buf) % 3073 != 0:
            raise DataFormatError(
                f"{path}: length {len(buf)} is not a multiple of the 3073-byte record size"
            )
        recs = np.frombuffer(buf, dtype=np.uint8).reshape(-1, 3073)
        label_chunks.append(recs[:, 0].astype(np.int64))
        chunks.append(recs[:, 1:].astype(np.float64) / 255.0)
    inputs = np.concatenate(chunks)
    labels = np.concatenate(label_chunks)
    ds = Dataset(inputs, labels, "cifar10", split, image_shape=(3, 32, 32))
    return ds.validate(class_count=10)


MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
CIFAR_FILES = {
    "train": tuple(f"data_batch_{i}.bin" for i in range(1, 6)),
    "test": ("test_batch.bin",),
}


def _find(root, name):
    for cand in (name, name + ".gz"):
        p = os.path.join(root, cand)
        if os.path.exists(p):
            return p
    return None


def mnist_from_root(root, split="train") -> Dataset:
    images, labels = MNIST_FILES[split]
    ipath, lpath = _find(root, images), _find(root, labels)
    if ipath is None or lpath is None:
        raise DataFormatError(
            f"MNIST {split} files not found under {root!r}: expected {images}[.gz] and {labels}[.gz]"
        )
    return load_mnist(ipath, lpath, split)


def cifar10_from_root(root, split="train") -> Dataset:
    base = root
    sub = os.path.join(root, "cifar-10-batches-bin")
    if os.path.isdir(sub):
        base = sub
    names = CIFAR_FILES[split]
    paths = [_find(base, n) for n in names]
    if any(p is None for p in paths):
        raise DataFormatError(
            f"CIFAR-10 {split} files not found under {base!r}: expected {', '.join(names)}"
        )
    return load_cifar10(paths, split)


def dataset_from_root(name, root, split="train") -> Dataset:
    if name == "mnist":
        return mnist_from_root(root, split)
    if name == "cifar10":
        return cifar10_from_root(root, split)
    raise SpecError(f"unknown dataset {name!r}, expected mnist or cifar10")


def synthetic_dataset(seed, count, feature_dim, class_count, noise_std=0.05, split="train") -> Dataset:
    """Gaussian class clusters with unit-distance separated means, clipped to [0,1].

    Class c's mean sits at 1/sqrt(2) above baseline on axis (c mod feature_dim),
    so distinct-axis means are exactly unit Euclidean distance apart. Labels are
    assigned round-robin, then rows are shuffled.
    """
    for arg, val in (("count", count), ("feature_dim", feature_dim), ("class_count", class_count)):
        if val < 1:
            raise SpecError(f"{arg} must be positive, got {val}")
    rng = np.random.default_rng(seed)
    base = 0.15
    lift = 1.0 / np.sqrt(2.0)
    labels = np.arange(count, dtype=np.int64) % class_count
    means = np.full((count, feature_dim), base)
    means[np.arange(count), labels % feature_dim] += lift
    inputs = np.clip(means + rng.normal(0.0, noise_std, size=(count, feature_dim)), 0.0, 1.0)
    perm = rng.permutation(count)
    ds = Dataset(inputs[perm], labels[perm], "synthetic", split)
    return ds.validate(class_count=class_count)


def sample_inputs(dataset: Dataset, n: int, seed: int) -> SampleBatch:
    """Draw n distinct rows uniformly, deterministic in seed."""
    if n < 1:
        raise SpecError(f"sample size must be positive, got {n}")
    if n > dataset.count:
        raise SpecError(f"sample size {n} exceeds dataset count {dataset.count}")
    rng = np.random.default_rng(seed)
    idx = rng.choice(dataset.count, size=n, replace=False)
    return SampleBatch(dataset.inputs[idx], idx, seed, image_shape=dataset.image_shape)


def save_dataset(dataset: Dataset, path):
    """npz round-trip; arrays reload bit-identical."""
    payload = {
        "inputs": dataset.inputs,
        "name": np.str_(dataset.name),
        "split": np.str_(dataset.split),
    }
    if dataset.labels is not None:
        payload["labels"] = dataset.labels
    if dataset.image_shape is not None:
        payload["image_shape"] = np.asarray(dataset.image_shape, dtype=np.int64)
    np.savez_compressed(path, **payload)


def load_dataset(path) -> Dataset:
    if not os.path.exists(path):
        raise DataFormatError(f"file not found: {path}")
    with np.load(path, allow_pickle=False) as z:
        if "inputs" not in z:
            raise DataFormatError(f"{path}: not a saved dataset (no 'inputs' array)")
        labels = z["labels"] if "labels" in z else None
        shape = tuple(int(v) for v in z["image_shape"]) if "image_shape" in z else None
        return Dataset(z["inputs"], labels, str(z["name"]), str(z["split"]), image_shape=shape)
