"""Ordering of unordered dictionary columns by focal-point geometry.

A learned dictionary recovers the sensing-matrix columns up to an unknown
permutation.  The columns of nearby focal points are strongly correlated,
so the correlation graph of the dictionary inherits the lattice topology
of the image grid: 4-nearest-neighbor edges, hop distances equal to
Manhattan distances, and a 2-D layout recoverable by multidimensional
scaling.  The pipeline here is

    correlation_graph -> geodesic_distances -> classical_mds
      (-> stress-majorization refinement) -> align_with_anchors
      -> assign_to_grid

Alignment operates in grid-index coordinates (columns of the image grid
live on an anisotropic lattice in meters, which a uniform-scale
similarity transform cannot reproduce; hop space is isotropic).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .sparsedict import Dictionary
from .wavefield import ImageGrid

__all__ = [
    "NeighborGraph",
    "GeodesicMatrix",
    "GridEmbedding",
    "AlignmentResult",
    "GraphDisconnectedError",
    "DegenerateEmbeddingError",
    "correlation_graph",
    "geodesic_distances",
    "classical_mds",
    "smacof_refine",
    "align_with_anchors",
    "assign_to_grid",
    "grid_index_coordinates",
    "order_columns",
]


class GraphDisconnectedError(ValueError):
    """Correlation graph split into several components."""

    def __init__(self, labels: np.ndarray):
        self.component_labels = labels
        n = int(labels.max()) + 1
        sizes = np.bincount(labels)
        super().__init__(
            f"correlation graph has {n} connected components "
            f"(sizes {sizes.tolist()}); raise neighbor_count")


class DegenerateEmbeddingError(ValueError):
    """Too few positive eigenvalues to embed in the requested dimension."""


@dataclass(frozen=True)
class NeighborGraph:
    """Undirected k-nearest-correlation graph over dictionary columns."""

    edges: np.ndarray          # (n_edges, 2) vertex index pairs, i < j
    n_vertices: int
    neighbor_count: int = 4

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=int)
        if e.ndim != 2 or e.shape[1] != 2:
            raise ValueError("edges must be an (n_edges, 2) array")
        if np.any(e[:, 0] >= e[:, 1]):
            raise ValueError("edges must be stored with i < j")
        if e.size and (e.min() < 0 or e.max() >= self.n_vertices):
            raise ValueError("edge endpoint out of range")
        object.__setattr__(self, "edges", e)

    def adjacency(self) -> csr_matrix:
        i, j = self.edges.T if len(self.edges) else (np.empty(0, int),) * 2
        ones = np.ones(2 * len(self.edges))
        return csr_matrix(
            (ones, (np.concatenate([i, j]), np.concatenate([j, i]))),
            shape=(self.n_vertices, self.n_vertices))

    def neighbors(self, v: int) -> np.ndarray:
        e = self.edges
        return np.sort(np.concatenate([e[e[:, 0] == v, 1], e[e[:, 1] == v, 0]]))


@dataclass(frozen=True)
class GeodesicMatrix:
    """All-pairs hop counts of a connected NeighborGraph."""

    distances: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.distances)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("distance matrix must be square")
        if not np.array_equal(d, d.T):
            raise ValueError("distance matrix must be symmetric")
        if np.any(np.diag(d) != 0):
            raise ValueError("distance matrix must have a zero diagonal")
        if np.any(d < 0):
            raise ValueError("distances must be nonnegative")
        object.__setattr__(self, "distances", d.astype(int))


@dataclass(frozen=True)
class GridEmbedding:
    """2-D point configuration for the dictionary columns.

    Coordinates are dimensionless MDS output until `aligned`; after
    anchor alignment they live in grid-index units (cross index,
    range index).
    """

    coordinates: np.ndarray
    aligned: bool = False
    eigenvalues: Optional[np.ndarray] = None

    def __post_init__(self):
        c = np.asarray(self.coordinates, dtype=float)
        if c.ndim != 2:
            raise ValueError("coordinates must be a (K, dims) array")
        object.__setattr__(self, "coordinates", c)


@dataclass(frozen=True)
class AlignmentResult:
    embedding: GridEmbedding
    anchor_residuals: np.ndarray
    scale: float
    rotation: np.ndarray
    translation: np.ndarray
    reflected: bool


def correlation_graph(dictionary: Dictionary,
                      neighbor_count: int = 4) -> NeighborGraph:
    """Connect every column to its `neighbor_count` most-correlated
    partners (by |inner product|), symmetrized by union.

    Raises GraphDisconnectedError when the result is not connected.
    """
    if neighbor_count < 1:
        raise ValueError("neighbor_count must be positive")
    D = dictionary.normalize().columns
    K = D.shape[1]
    if K < 2:
        raise ValueError("need at least two columns")
    k = min(neighbor_count, K - 1)
    C = np.abs(D.conj().T @ D)
    np.fill_diagonal(C, -1.0)
    top = np.argpartition(C, -k, axis=1)[:, -k:]
    rows = np.repeat(np.arange(K), k)
    cols = top.ravel()
    lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
    edges = np.unique(np.column_stack([lo, hi]), axis=0)
    graph = NeighborGraph(edges, K, neighbor_count)
    n_comp, labels = connected_components(graph.adjacency(), directed=False)
    if n_comp > 1:
        raise GraphDisconnectedError(labels)
    return graph


def geodesic_distances(graph: NeighborGraph) -> GeodesicMatrix:
    """Breadth-first all-pairs hop counts over the graph."""
    d = shortest_path(graph.adjacency(), method="D", directed=False,
                      unweighted=True)
    if np.any(np.isinf(d)):
        _, labels = connected_components(graph.adjacency(), directed=False)
        raise GraphDisconnectedError(labels)
    return GeodesicMatrix(d.astype(int))


def classical_mds(dist: GeodesicMatrix, dims: int = 2) -> GridEmbedding:
    """Torgerson MDS: eigendecomposition of the double-centered squared
    distance matrix; coordinates are the top eigenvectors scaled by
    square-rooted eigenvalues, centered at the origin.
    """
    D2 = dist.distances.astype(float) ** 2
    K = D2.shape[0]
    if dims < 1 or dims >= K:
        raise ValueError("dims must be in [1, K)")
    B = D2 - D2.mean(axis=0) - D2.mean(axis=1)[:, None] + D2.mean()
    B *= -0.5
    w, V = np.linalg.eigh(B)
    w, V = w[::-1], V[:, ::-1]
    # eigenvalues below numerical noise of the leading one do not carry
    # geometry; a collinear configuration must not embed in 2-D
    floor = 1e-9 * max(w[0], 0.0)
    if np.count_nonzero(w[:dims] > floor) < dims:
        raise DegenerateEmbeddingError(
            f"only {np.count_nonzero(w > floor)} significant positive "
            f"eigenvalues, {dims} required")
    X = V[:, :dims] * np.sqrt(w[:dims])
    return GridEmbedding(X - X.mean(axis=0), aligned=False, eigenvalues=w)


def smacof_refine(dist: GeodesicMatrix, embedding: GridEmbedding,
                  max_iters: int = 300, tol: float = 1e-9) -> GridEmbedding:
    """Stress-majorization (SMACOF) refinement of an MDS embedding.

    Hop counts are not exactly Euclidean, and the classical solution
    systematically bows the lattice; a few hundred Guttman-transform
    steps reduce the per-point error well below half a grid spacing.
    """
    Delta = dist.distances.astype(float)
    X = embedding.coordinates.copy()
    K = X.shape[0]
    prev = np.inf
    for _ in range(max_iters):
        diff = X[:, None, :] - X[None, :, :]
        d = np.linalg.norm(diff, axis=2)
        np.fill_diagonal(d, 1.0)
        np.maximum(d, 1e-12, out=d)
        stress = float(np.sum((Delta - np.where(np.eye(K, dtype=bool), 0, d)) ** 2)) / 2
        ratio = Delta / d
        np.fill_diagonal(ratio, 0.0)
        B = -ratio
        np.fill_diagonal(B, ratio.sum(axis=1))
        X = (B @ X) / K
        if prev - stress <= tol * max(prev, 1.0):
            break
        prev = stress
    return GridEmbedding(X - X.mean(axis=0), aligned=False,
                         eigenvalues=embedding.eigenvalues)


def _similarity_fit(src: np.ndarray, dst: np.ndarray, reflect: bool):
    """Closed-form least-squares similarity (scale, rotation, translation)
    from src points to dst points, with the rotation determinant forced to
    +1 (reflect=False) or -1 (reflect=True)."""
    mu_s, mu_d = src.mean(axis=0), dst.mean(axis=0)
    S, T = src - mu_s, dst - mu_d
    var_s = np.sum(S ** 2) / len(src)
    U, sv, Vt = np.linalg.svd(T.T @ S / len(src))
    sign = np.ones(src.shape[1])
    if (np.linalg.det(U) * np.linalg.det(Vt) < 0) != reflect:
        sign[-1] = -1.0
    R = U @ np.diag(sign) @ Vt
    scale = float(np.sum(sv * sign) / var_s)
    t = mu_d - scale * R @ mu_s
    return scale, R, t


def align_with_anchors(embedding: GridEmbedding,
                       anchors: Sequence[Tuple[int, Sequence[float]]],
                       allow_reflection: bool = True) -> AlignmentResult:
    """Map the embedding onto known anchor positions by a least-squares
    similarity transform; with `allow_reflection` both orientations are
    tried and the lower-residual one kept.

    `anchors` pairs a vertex index with its true 2-D position (grid-index
    units).  At least three non-collinear anchors are required.
    """
    idx = np.array([a[0] for a in anchors], dtype=int)
    pos = np.array([a[1] for a in anchors], dtype=float)
    if len(idx) < 3:
        raise ValueError("need at least three anchors")
    spread = pos - pos.mean(axis=0)
    if np.linalg.matrix_rank(spread, tol=1e-9 * max(1.0, np.abs(spread).max())) < 2:
        raise ValueError("anchor positions are collinear; alignment ill-posed")
    src = embedding.coordinates[idx]
    fits = [(False, *_similarity_fit(src, pos, False))]
    if allow_reflection:
        fits.append((True, *_similarity_fit(src, pos, True)))
    best = None
    for reflected, scale, R, t in fits:
        resid = np.linalg.norm(scale * src @ R.T + t - pos, axis=1)
        if best is None or resid.sum() < best[0]:
            best = (resid.sum(), reflected, scale, R, t, resid)
    _, reflected, scale, R, t, resid = best
    mapped = scale * embedding.coordinates @ R.T + t
    return AlignmentResult(GridEmbedding(mapped, aligned=True,
                                         eigenvalues=embedding.eigenvalues),
                           resid, scale, R, t, reflected)


def grid_index_coordinates(grid: ImageGrid) -> np.ndarray:
    """(K, 2) array of (cross index, range index) per grid point, in the
    row-major order of the sensing-matrix columns."""
    ic = np.arange(grid.n_cross)
    ir = np.arange(grid.n_range)
    return np.column_stack([np.tile(ic, grid.n_range),
                            np.repeat(ir, grid.n_cross)]).astype(float)


def corner_anchor_indices(grid: ImageGrid) -> Tuple[int, int, int]:
    """Column indices of three image-window corners (first row ends and
    last row start) under the canonical row-major ordering."""
    return (0, grid.n_cross - 1, (grid.n_range - 1) * grid.n_cross)


def assign_to_grid(aligned: GridEmbedding, grid: ImageGrid) -> np.ndarray:
    """One-to-one snap of aligned points onto grid points minimizing total
    squared displacement.

    Returns `perm` with perm[k] = estimated-column index placed at grid
    point k.  A mean displacement above one grid cell triggers a
    low-confidence warning, not a failure.
    """
    if not aligned.aligned:
        raise ValueError("embedding must be anchor-aligned before assignment")
    targets = grid_index_coordinates(grid)
    X = aligned.coordinates
    if X.shape != targets.shape:
        raise ValueError("embedding size does not match the grid")
    cost = (np.sum(X ** 2, axis=1)[:, None] + np.sum(targets ** 2, axis=1)[None, :]
            - 2.0 * X @ targets.T)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(len(rows), dtype=int)
    perm[cols] = rows
    disp = np.linalg.norm(X[perm] - targets, axis=1)
    if disp.mean() > 1.0:
        warnings.warn(
            f"low-confidence grid assignment: mean displacement "
            f"{disp.mean():.2f} grid cells", RuntimeWarning)
    return perm


@dataclass(frozen=True)
class OrderingResult:
    permutation: np.ndarray
    embedding: GridEmbedding
    alignment: AlignmentResult
    graph: NeighborGraph
    geodesics: GeodesicMatrix


def order_columns(dictionary: Dictionary, grid: ImageGrid,
                  anchors: Sequence[Tuple[int, Sequence[float]]], *,
                  neighbor_count: int = 4, refine: bool = True,
                  allow_reflection: bool = True) -> OrderingResult:
    """Full ordering pipeline: graph, hops, MDS (plus optional SMACOF
    refinement), anchor alignment, snap-to-grid.

    `anchors` pair dictionary column indices with their known grid-index
    positions, e.g. three corners of the image window.
    """
    graph = correlation_graph(dictionary, neighbor_count)
    geo = geodesic_distances(graph)
    emb = classical_mds(geo)
    if refine:
        emb = smacof_refine(geo, emb)
    alignment = align_with_anchors(emb, anchors, allow_reflection)
    perm = assign_to_grid(alignment.embedding, grid)
    return OrderingResult(perm, alignment.embedding, alignment, graph, geo)
