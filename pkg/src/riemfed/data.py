"""Dataset generation, loading and partitioning.

Matrices are stored samples x features (rows are samples).
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

IDX3_MAGIC = 0x00000803


class DataError(ValueError):
    """Malformed or unreadable dataset."""


@dataclass(frozen=True)
class DataMatrix:
    values: np.ndarray
    source: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise DataError(f"data must be a non-empty 2-D array, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            r, c = np.argwhere(~np.isfinite(v))[0]
            raise DataError(f"{self.source or 'data'}: non-finite value at row {r}, column {c}")
        object.__setattr__(self, "values", v)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def centered(self) -> "DataMatrix":
        return DataMatrix(self.values - self.values.mean(axis=0), self.source + " (centered)")

    def take(self, idx) -> "DataMatrix":
        return DataMatrix(self.values[idx], self.source)


@dataclass(frozen=True)
class Partition:
    """Client blocks as index arrays into the (optionally shuffled) row order."""

    order: np.ndarray
    bounds: tuple[tuple[int, int], ...]

    @property
    def n(self) -> int:
        return len(self.bounds)

    def sizes(self) -> list[int]:
        return [b - a for a, b in self.bounds]

    def indices(self, i: int) -> np.ndarray:
        a, b = self.bounds[i]
        return self.order[a:b]


def gen_gaussian(p: int, d: int, seed: int) -> DataMatrix:
    if p < 1 or d < 1:
        raise ValueError("p and d must be positive")
    rng = np.random.default_rng(seed)
    return DataMatrix(rng.standard_normal((p, d)), f"gaussian(p={p}, d={d}, seed={seed})")


def partition_equal(p: int, n: int, shuffle_seed: Optional[int] = None) -> Partition:
    """Split p rows into n contiguous blocks whose sizes differ by at most one.

    Larger blocks come first. With ``shuffle_seed`` the row order is permuted
    before splitting.
    """
    if not 1 <= n <= p:
        raise ValueError(f"need 1 <= n <= p, got n={n}, p={p}")
    order = np.arange(p)
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(p)
    base, extra = divmod(p, n)
    bounds = []
    start = 0
    for i in range(n):
        size = base + (1 if i < extra else 0)
        bounds.append((start, start + size))
        start += size
    return Partition(order, tuple(bounds))


def covariance(block: DataMatrix | np.ndarray, normalize: bool = False) -> np.ndarray:
    """Gram matrix X^T X of a samples x features block (unnormalized by default)."""
    x = block.values if isinstance(block, DataMatrix) else np.asarray(block, dtype=float)
    a = x.T @ x
    if normalize:
        a /= x.shape[0]
    return 0.5 * (a + a.T)


def client_covariances(data: DataMatrix, partition: Partition, normalize: bool = False) -> list[np.ndarray]:
    return [covariance(data.values[partition.indices(i)], normalize) for i in range(partition.n)]


def load_csv(path, has_header: bool = False, label_column: Optional[int] = None) -> DataMatrix:
    """Read a comma-separated numeric table, dropping ``label_column`` if given.

    Negative ``label_column`` counts from the end of each row.
    """
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as e:
        raise DataError(f"cannot open {path}: {e.strerror}") from e
    rows = []
    width = None
    with fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1 and has_header:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            if label_column is not None:
                try:
                    del row[label_column]
                except IndexError:
                    raise DataError(f"{path}:{lineno}: no column {label_column} to drop") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DataError(f"{path}:{lineno}: expected {width} fields, got {len(row)}")
            vals = []
            for col, cell in enumerate(row):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(f"{path}:{lineno}: column {col}: not a number: {cell!r}") from None
                if not np.isfinite(v):
                    raise DataError(f"{path}:{lineno}: column {col}: non-finite value {cell!r}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return DataMatrix(np.array(rows), str(path))


def load_idx(path) -> DataMatrix:
    """Read an IDX3 unsigned-byte image file into a p x (rows*cols) matrix scaled to [0, 1]."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise DataError(f"cannot open {path}: {e.strerror}") from e
    if len(raw) < 16:
        raise DataError(f"{path}: truncated header")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IDX3_MAGIC:
        raise DataError(f"{path}: bad magic 0x{magic:08x}, expected 0x{IDX3_MAGIC:08x}")
    need = count * rows * cols
    payload = raw[16:]
    if len(payload) < need:
        raise DataError(f"{path}: truncated payload, expected {need} bytes, got {len(payload)}")
    pixels = np.frombuffer(payload, dtype=np.uint8, count=need).reshape(count, rows * cols)
    return DataMatrix(pixels.astype(float) / 255.0, str(path))


def write_idx(path, images: np.ndarray) -> None:
    """Write uint8 images of shape (count, rows, cols) as an IDX3 file."""
    images = np.asarray(images, dtype=np.uint8)
    count, rows, cols = images.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX3_MAGIC, count, rows, cols))
        fh.write(images.tobytes())
