"""Dataset plumbing: IDX parsing, label binarization, feature splitting,
client partitioning, and synthetic quadratic instance generation.

IDX files are the standard MNIST container: big-endian magic, dimension
sizes, then raw unsigned bytes. Parsing is bit-exact and strict: wrong
magic, short payloads and trailing bytes are all distinct errors. Gzipped
files are inflated transparently when read from disk.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass

import numpy as np

from .objectives import QuadraticObjective
from .rng import stream

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class DataFormatError(ValueError):
    pass


class BadMagic(DataFormatError):
    pass


class Truncated(DataFormatError):
    pass


class TrailingBytes(DataFormatError):
    pass


class LabelOutOfRange(DataFormatError):
    pass


class DimMismatch(ValueError):
    pass


class TooFewExamples(ValueError):
    pass


@dataclass(frozen=True)
class RawDataset:
    """Parsed images (count, pixels) in [0, 1] with digit labels 0-9."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise DataFormatError(
                f"{self.images.shape[0]} images but {self.labels.shape[0]} labels"
            )

    @property
    def count(self) -> int:
        return self.images.shape[0]


@dataclass(frozen=True)
class ClientShard:
    """One client's rows: shared features A, personal features B, labels y in {-1,+1}."""

    client_id: int  # 1-based
    A: np.ndarray  # (N_i, d_u)
    B: np.ndarray  # (N_i, d_v)
    y: np.ndarray  # (N_i,)

    @property
    def n_rows(self) -> int:
        return self.y.shape[0]


def parse_idx_images(data: bytes) -> np.ndarray:
    """Parse an IDX image file into a (count, rows*cols) float64 array in [0, 1]."""
    if len(data) < 16:
        raise Truncated(f"image header needs 16 bytes, got {len(data)}")
    magic, count, rows, cols = struct.unpack_from(">IIII", data, 0)
    if magic != IMAGES_MAGIC:
        raise BadMagic(f"expected magic 0x{IMAGES_MAGIC:08x}, got 0x{magic:08x}")
    expected = 16 + count * rows * cols
    if len(data) < expected:
        raise Truncated(f"header promises {expected} bytes, got {len(data)}")
    if len(data) > expected:
        raise TrailingBytes(f"{len(data) - expected} bytes beyond promised payload")
    pixels = np.frombuffer(data, dtype=np.uint8, offset=16)
    return pixels.reshape(count, rows * cols).astype(np.float64) / 255.0


def parse_idx_labels(data: bytes) -> np.ndarray:
    """Parse an IDX label file into an int64 array of digits 0-9."""
    if len(data) < 8:
        raise Truncated(f"label header needs 8 bytes, got {len(data)}")
    magic, count = struct.unpack_from(">II", data, 0)
    if magic != LABELS_MAGIC:
        raise BadMagic(f"expected magic 0x{LABELS_MAGIC:08x}, got 0x{magic:08x}")
    expected = 8 + count
    if len(data) < expected:
        raise Truncated(f"header promises {expected} bytes, got {len(data)}")
    if len(data) > expected:
        raise TrailingBytes(f"{len(data) - expected} bytes beyond promised payload")
    labels = np.frombuffer(data, dtype=np.uint8, offset=8).astype(np.int64)
    if labels.size and labels.max() > 9:
        bad = int(labels[labels > 9][0])
        raise LabelOutOfRange(f"label {bad} outside 0..9")
    return labels


def read_idx_bytes(path: str) -> bytes:
    """Read a file, inflating transparently if it is gzip-compressed."""
    with open(path, "rb") as f:
        head = f.read(2)
        f.seek(0)
        if head == b"\x1f\x8b":
            return gzip.decompress(f.read())
        return f.read()


def load_mnist(images_path: str, labels_path: str) -> RawDataset:
    images = parse_idx_images(read_idx_bytes(images_path))
    labels = parse_idx_labels(read_idx_bytes(labels_path))
    return RawDataset(images=images, labels=labels)


def binarize_labels(digits: np.ndarray) -> np.ndarray:
    """Even digit -> +1, odd digit -> -1."""
    digits = np.asarray(digits, dtype=np.int64)
    return np.where(digits % 2 == 0, 1, -1).astype(np.int64)


def split_features(x: np.ndarray, d_u: int, d_v: int):
    """Split a feature vector into shared prefix a (d_u) and personal suffix b (d_v)."""
    x = np.asarray(x)
    if d_u < 1 or d_v < 1 or d_u + d_v != x.shape[-1]:
        raise DimMismatch(f"d_u + d_v = {d_u} + {d_v} must equal feature count {x.shape[-1]}")
    return x[..., :d_u], x[..., d_u:]


def _block_sizes(count: int, n: int) -> list[int]:
    # remainder rows go one each to the lowest-index shards
    base, rem = divmod(count, n)
    return [base + 1 if i < rem else base for i in range(n)]


def partition_clients(
    dataset: RawDataset,
    n: int,
    scheme: str,
    seed: int,
    d_u: int,
    d_v: int,
) -> list[ClientShard]:
    """Partition a dataset into n ClientShards (disjoint, union = dataset).

    iid: seeded shuffle, then contiguous equal-size blocks. by_label: stable
    sort by digit, then contiguous blocks, i.e. adjacent digit ranges per client,
    which maximizes heterogeneity. Labels are binarized by parity and each
    image is split into shared/personal feature blocks.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if dataset.count < n:
        raise TooFewExamples(f"{dataset.count} examples cannot fill {n} shards")
    if scheme == "iid":
        order = stream(seed, "partition").permutation(dataset.count)
    elif scheme == "by_label":
        order = np.argsort(dataset.labels, kind="stable")
    else:
        raise ValueError(f"unknown partition scheme {scheme!r}")

    y_all = binarize_labels(dataset.labels).astype(np.float64)
    a_all, b_all = split_features(dataset.images, d_u, d_v)

    shards = []
    start = 0
    for i, size in enumerate(_block_sizes(dataset.count, n)):
        rows = order[start : start + size]
        start += size
        shards.append(
            ClientShard(
                client_id=i + 1,
                A=np.ascontiguousarray(a_all[rows]),
                B=np.ascontiguousarray(b_all[rows]),
                y=y_all[rows],
            )
        )
    return shards


def cap_shard(shard: ClientShard, cap: int) -> ClientShard:
    """First `cap` rows of a shard (identity when the shard is smaller)."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    if shard.n_rows <= cap:
        return shard
    return ClientShard(
        client_id=shard.client_id,
        A=shard.A[:cap].copy(),
        B=shard.B[:cap].copy(),
        y=shard.y[:cap].copy(),
    )


def synth_quadratic(
    n: int,
    d_u: int,
    d_v: int,
    spread: float,
    sigma_u: float,
    sigma_v: float,
    seed: int,
):
    """Synthetic heterogeneous quadratic with exactly known dissimilarity.

    Client centers a_i = h_i * spread * e with e = ones/sqrt(d_u) and h_i
    standard normal recentered to mean zero, so the dissimilarity constant
    b^2 = spread^2 * (1/n) sum h_i^2 is returned exactly alongside the
    objective. Personal centers b_i are standard normal.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if spread < 0:
        raise ValueError("spread must be >= 0")
    g = stream(seed, "synth")
    h = g.standard_normal(n)
    h = h - h.mean()
    e = np.ones(d_u) / np.sqrt(d_u)
    centers_u = spread * np.outer(h, e)
    centers_v = g.standard_normal((n, d_v))
    b2 = spread * spread * float((h * h).mean())
    obj = QuadraticObjective(
        centers_u=centers_u, centers_v=centers_v, sigma_u=sigma_u, sigma_v=sigma_v
    )
    return obj, b2
