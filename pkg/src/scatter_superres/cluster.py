"""Consensus building across independent dictionary estimates.

Each realization of the learning pipeline produces unordered,
phase-ambiguous column estimates.  Pooling the columns of several
realizations and clustering them under the collinearity metric

    d(z, w) = 1 - |<z, w>|

separates true sensing-matrix columns (dense clusters) from junk atoms
(noise), and the phase-oriented average of each large cluster is a
refined column estimate.  The clustering is a from-scratch DBSCAN with a
deterministic expansion order, so results are reproducible bit-for-bit.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .sparsedict import Dictionary, UnderRecoveryError

__all__ = [
    "ColumnPool",
    "ClusterResult",
    "collinearity_distance",
    "dbscan",
    "oriented_average",
    "consensus_dictionary",
    "cluster_count_sweep",
]

_UNIT_TOL = 1e-9


@dataclass(frozen=True)
class ColumnPool:
    """Unit-normalized column estimates pooled across realizations."""

    vectors: np.ndarray          # (NF, P) complex, unit columns
    source_tag: np.ndarray       # realization index per column

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=complex)
        if v.ndim != 2:
            raise ValueError("vectors must be a 2-D matrix")
        norms = np.linalg.norm(v, axis=0)
        if np.any(np.abs(norms - 1.0) > _UNIT_TOL):
            raise ValueError("pool columns must be unit-normalized")
        tag = np.asarray(self.source_tag, dtype=int).reshape(-1)
        if len(tag) != v.shape[1]:
            raise ValueError("one source tag per pooled column required")
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "source_tag", tag)

    @property
    def n_columns(self) -> int:
        return self.vectors.shape[1]

    @classmethod
    def from_dictionaries(cls, dictionaries: Sequence[Dictionary]) -> "ColumnPool":
        cols = [d.normalize().columns for d in dictionaries]
        tags = np.concatenate([np.full(c.shape[1], i) for i, c in enumerate(cols)])
        return cls(np.concatenate(cols, axis=1), tags)


@dataclass(frozen=True)
class ClusterResult:
    """DBSCAN partition: labels in {-1 (noise), 0..cluster_count-1}."""

    labels: np.ndarray
    cluster_count: int
    core_flags: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=int).reshape(-1)
        core = np.asarray(self.core_flags, dtype=bool).reshape(-1)
        if len(lab) != len(core):
            raise ValueError("labels and core flags must have equal length")
        if lab.size and (lab.min() < -1 or lab.max() >= self.cluster_count):
            raise ValueError("labels out of range")
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "core_flags", core)

    def members(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.labels == label)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels[self.labels >= 0],
                           minlength=self.cluster_count)

    @property
    def n_noise(self) -> int:
        return int(np.count_nonzero(self.labels == -1))


def collinearity_distance(z: np.ndarray, w: np.ndarray) -> float:
    """1 - |<z, w>| for unit vectors; zero iff collinear up to phase."""
    z = np.asarray(z, dtype=complex).reshape(-1)
    w = np.asarray(w, dtype=complex).reshape(-1)
    for v in (z, w):
        if abs(np.linalg.norm(v) - 1.0) > _UNIT_TOL:
            raise ValueError("collinearity distance requires unit vectors")
    return float(np.clip(1.0 - abs(np.vdot(z, w)), 0.0, 1.0))


def _distance_matrix(V: np.ndarray) -> np.ndarray:
    d = 1.0 - np.abs(V.conj().T @ V)
    np.clip(d, 0.0, 1.0, out=d)
    np.fill_diagonal(d, 0.0)
    return d


def dbscan(pool: ColumnPool, eps: float, c_min: int) -> ClusterResult:
    """Density clustering under the collinearity metric.

    A column with at least `c_min` eps-neighbors (itself included) is a
    core sample; clusters grow from cores through eps-neighborhoods;
    everything unreached is noise.  Columns are processed in ascending
    index order, so border points reachable from two clusters join the
    first-discovered (lowest-label) one.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if c_min < 1:
        raise ValueError("c_min must be at least 1")
    P = pool.n_columns
    dist = _distance_matrix(pool.vectors)
    neighbor_mask = dist <= eps
    counts = neighbor_mask.sum(axis=1)
    core = counts >= c_min
    labels = np.full(P, -2, dtype=int)   # -2 = unvisited, -1 = noise
    label = 0
    for p in range(P):
        if labels[p] != -2:
            continue
        if not core[p]:
            labels[p] = -1
            continue
        labels[p] = label
        queue = deque([p])
        while queue:
            q = queue.popleft()
            if not core[q]:
                continue
            for r in np.flatnonzero(neighbor_mask[q]):
                if labels[r] in (-2, -1):
                    labels[r] = label
                    if core[r]:
                        queue.append(r)
        label += 1
    return ClusterResult(labels, label, core)


def oriented_average(pool: ColumnPool, cluster: Sequence[int]) -> np.ndarray:
    """Phase-aligned normalized mean of a cluster of unit columns.

    The first member is the phase reference; each member is rotated so
    its inner product with the reference is real positive.  Members
    orthogonal to the reference cannot be oriented and are dropped with a
    warning.
    """
    idx = np.asarray(cluster, dtype=int).reshape(-1)
    if idx.size == 0:
        raise ValueError("cluster must be non-empty")
    V = pool.vectors[:, idx]
    ref = V[:, 0]
    inner = V.conj().T @ ref          # <ref, v_j> conj; phase of alignment
    ok = np.abs(inner) >= _UNIT_TOL
    if not np.all(ok):
        warnings.warn(
            f"{np.count_nonzero(~ok)} cluster members orthogonal to the "
            "reference; orientation ambiguous, members excluded",
            RuntimeWarning)
        V, inner = V[:, ok], inner[ok]
    phases = inner / np.abs(inner)
    mean = (V * phases[None, :]).mean(axis=1)
    n = np.linalg.norm(mean)
    if n == 0:
        raise ValueError("cluster members cancel; no consensus direction")
    return mean / n


def consensus_dictionary(pool: ColumnPool, eps: float = 0.0075,
                         c_min: int = 5, K_target: int = 0,
                         result: Optional[ClusterResult] = None):
    """Oriented averages of the K_target largest clusters.

    Returns (Dictionary, cluster sizes).  Raises UnderRecoveryError when
    fewer than K_target clusters emerge; the remedy is more realizations
    or a different eps.
    """
    if K_target < 1:
        raise ValueError("K_target must be positive")
    if result is None:
        result = dbscan(pool, eps, c_min)
    if result.cluster_count < K_target:
        raise UnderRecoveryError(result.cluster_count, K_target)
    sizes = result.sizes()
    order = np.argsort(sizes, kind="stable")[::-1][:K_target]
    cols = np.column_stack([oriented_average(pool, result.members(int(lab)))
                            for lab in order])
    return Dictionary(cols, normalized=True), sizes[order]


def cluster_count_sweep(pool: ColumnPool, eps_values: Sequence[float],
                        c_min: int = 5) -> np.ndarray:
    """Cluster count per eps; a plateau marks a reliable column count."""
    return np.array([dbscan(pool, float(e), c_min).cluster_count
                     for e in eps_values])
