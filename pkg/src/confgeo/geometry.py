"""Point-cloud containers and pairwise Euclidean geometry.

A point is a 1-D float64 numpy array; a point cloud wraps an immutable
(n, dim) array.  Brute-force pair scans define the semantics of every
operation; blocked evaluation is an internal memory detail and never
changes results.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

# Rows per block in pairwise scans.  A memory/latency trade-off only.
BLOCK_ROWS = 512


def as_point(values) -> np.ndarray:
    """Coerce ``values`` to a finite 1-D float64 coordinate vector."""
    p = np.asarray(values, dtype=np.float64)
    if p.ndim == 0:
        p = p[None]
    if p.ndim != 1 or p.size == 0:
        raise ValueError("a point must be a non-empty 1-D coordinate sequence")
    if not np.all(np.isfinite(p)):
        raise ValueError("point coordinates must be finite")
    return p


def euclidean_distance(a, b) -> float:
    """Exact 2-norm of ``a - b``; raises on dimension mismatch."""
    a = as_point(a)
    b = as_point(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.size} vs {b.size}")
    return float(np.linalg.norm(a - b))


class PointCloud:
    """Immutable indexed sequence of points sharing one ambient dimension."""

    __slots__ = ("coords",)

    def __init__(self, coords):
        arr = np.array(coords, dtype=np.float64, copy=True)
        if arr.ndim == 1:
            # a flat sequence is read as n points on the real line
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("a point cloud must be a non-empty (n, dim) array")
        if not np.all(np.isfinite(arr)):
            raise ValueError("point coordinates must be finite")
        arr.setflags(write=False)
        self.coords = arr

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, index: int) -> np.ndarray:
        return self.coords[index]

    def __repr__(self) -> str:
        return f"PointCloud(n={self.n}, dim={self.dim})"

    def same_cloud(self, other: "PointCloud") -> bool:
        if self is other:
            return True
        return (
            self.coords.shape == other.coords.shape
            and np.array_equal(self.coords, other.coords)
        )

    def find_point(self, point) -> int | None:
        """Index of the first point exactly equal to ``point``, else None."""
        point = as_point(point)
        if point.size != self.dim:
            raise ValueError(f"dimension mismatch: {point.size} vs {self.dim}")
        hits = np.nonzero((self.coords == point).all(axis=1))[0]
        return int(hits[0]) if hits.size else None

    @staticmethod
    def from_csv(path) -> "PointCloud":
        """Load a cloud from CSV: one point per line, no header, LF endings.

        The dimension is inferred from the first line; ragged rows raise a
        ValueError naming the offending line number.
        """
        path = Path(path)
        rows: list[list[float]] = []
        dim = None
        with path.open("r", encoding="utf-8", newline="") as fp:
            for lineno, raw in enumerate(fp, start=1):
                line = raw.strip()
                if not line:
                    continue
                fields = line.split(",")
                if dim is None:
                    dim = len(fields)
                elif len(fields) != dim:
                    raise ValueError(
                        f"{path}: line {lineno}: expected {dim} fields, got {len(fields)}"
                    )
                try:
                    rows.append([float(field) for field in fields])
                except ValueError as exc:
                    raise ValueError(f"{path}: line {lineno}: {exc}") from None
        if not rows:
            raise ValueError(f"{path}: no points found")
        return PointCloud(rows)

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", encoding="utf-8", newline="\n") as fp:
            for row in self.coords:
                fp.write(",".join(repr(float(v)) for v in row))
                fp.write("\n")


def pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Dense Euclidean distance matrix between two coordinate arrays."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    return cdist(a, b)


def min_distances(queries: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Distance from each query point to its nearest target point."""
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if queries.shape[1] != targets.shape[1]:
        raise ValueError(
            f"dimension mismatch: {queries.shape[1]} vs {targets.shape[1]}"
        )
    out = np.empty(queries.shape[0])
    for lo in range(0, queries.shape[0], BLOCK_ROWS):
        hi = min(lo + BLOCK_ROWS, queries.shape[0])
        out[lo:hi] = cdist(queries[lo:hi], targets).min(axis=1)
    return out


def nearest_indices(queries: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Index of the nearest target per query, ties broken by smaller index."""
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    out = np.empty(queries.shape[0], dtype=np.int64)
    for lo in range(0, queries.shape[0], BLOCK_ROWS):
        hi = min(lo + BLOCK_ROWS, queries.shape[0])
        # argmin returns the first (smallest-index) minimiser
        out[lo:hi] = cdist(queries[lo:hi], targets).argmin(axis=1)
    return out


def hausdorff_distance(reference_net: PointCloud, sample: PointCloud) -> float:
    """One-sided Hausdorff distance from a dense reference net to a sample.

    Returns the maximum over net points of the distance to the nearest
    sample point.  The net is the finite stand-in for the underlying
    continuum domain.
    """
    if reference_net.dim != sample.dim:
        raise ValueError(
            f"dimension mismatch: {reference_net.dim} vs {sample.dim}"
        )
    if sample.n < 1:
        raise ValueError("sample must contain at least one point")
    return float(min_distances(reference_net.coords, sample.coords).max())
