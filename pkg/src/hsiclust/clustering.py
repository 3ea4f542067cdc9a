"""KMeans, KNN affinity graphs, Laplacians and spectral clustering.

Samples are columns of the feature matrix throughout. The spectral pipeline
is: KNN graph -> Laplacian (degree minus weight) -> smallest eigenpairs ->
KMeans on the eigenvector rows. The first eigenvector is dropped and the
next ``c - 1`` are kept, one less than the number of wanted clusters. When
the graph is disconnected the zero eigenvalue repeats and "first" means
whichever vector the solver orders first; this is deliberate and not
corrected.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigsh
from scipy.spatial.distance import cdist

from .errors import NumericError, ParameterError
from .pursuit import TileCode

# Largest graph handed to the dense eigensolver; beyond this ARPACK
# shift-invert takes over.
DENSE_EIG_LIMIT = 2000
EIG_TOL = 1e-6
EIG_MAXITER = 5000


@dataclass
class Partition:
    """Cluster assignment: one label in ``0..n_clusters-1`` per sample."""

    labels: np.ndarray
    n_clusters: int

    def __post_init__(self):
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.labels.ndim != 1:
            raise ParameterError("labels must be a 1-D vector")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_clusters):
            raise ParameterError("label outside 0..n_clusters-1")

    @property
    def n(self) -> int:
        return int(self.labels.size)


@dataclass
class AffinityGraph:
    """Sparse symmetric nonnegative weights with an empty diagonal."""

    weights: sp.csr_matrix

    def __post_init__(self):
        w = sp.csr_matrix(self.weights)
        if w.shape[0] != w.shape[1]:
            raise ParameterError(f"affinity matrix must be square, got {w.shape}")
        if (w != w.T).nnz:
            raise ParameterError("affinity matrix must be exactly symmetric")
        if w.diagonal().any():
            raise ParameterError("affinity matrix must have a zero diagonal")
        if w.nnz and w.data.min() < 0:
            raise ParameterError("affinity weights must be nonnegative")
        self.weights = w

    @property
    def n_vertices(self) -> int:
        return int(self.weights.shape[0])


@dataclass
class LaplacianMatrix:
    matrix: sp.csr_matrix
    degrees: np.ndarray


@dataclass
class SpectralEmbedding:
    """Smallest eigenpairs of a Laplacian, eigenvalues ascending.

    ``vectors`` holds all computed eigenvectors as columns; ``embedding``
    applies the selection rule (drop the first, keep the rest) and returns
    one row of coordinates per sample.
    """

    eigenvalues: np.ndarray  # (c,)
    vectors: np.ndarray  # (n, c)

    @property
    def embedding(self) -> np.ndarray:
        return self.vectors[:, 1:]


def _feature_columns(features) -> np.ndarray:
    columns = getattr(features, "columns", features)
    columns = np.asarray(columns, dtype=np.float64)
    if columns.ndim != 2:
        raise ParameterError(f"expected a 2-D feature matrix, got shape {columns.shape}")
    if not np.isfinite(columns).all():
        raise ParameterError("features contain non-finite values")
    return columns


def _plusplus_init(pts: np.ndarray, c: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: spread initial centers by squared distance."""
    n = pts.shape[0]
    centers = np.empty((c, pts.shape[1]))
    centers[0] = pts[rng.integers(n)]
    d2 = cdist(pts, centers[:1], "sqeuclidean").ravel()
    for j in range(1, c):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)  # all mass on chosen points already
        centers[j] = pts[idx]
        d2 = np.minimum(d2, cdist(pts, centers[j : j + 1], "sqeuclidean").ravel())
    return centers


def _lloyd(
    pts: np.ndarray, centers: np.ndarray, max_iter: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lloyd iterations; returns labels, centers and the inertia per iteration."""
    n, c = pts.shape[0], centers.shape[0]
    labels = None
    inertias = []
    for _ in range(max_iter):
        d2 = cdist(pts, centers, "sqeuclidean")
        new_labels = np.argmin(d2, axis=1)
        own_d2 = d2[np.arange(n), new_labels]
        counts = np.bincount(new_labels, minlength=c)
        # Refill empty clusters with the globally worst-fitted point; a
        # donor emptied by the move is picked up on the next pass.
        while (counts == 0).any():
            empty = int(np.nonzero(counts == 0)[0][0])
            far = int(np.argmax(own_d2))
            counts[new_labels[far]] -= 1
            new_labels[far] = empty
            counts[empty] = 1
            centers[empty] = pts[far]
            own_d2[far] = -np.inf
        inertias.append(float(np.maximum(own_d2, 0.0).sum()))
        if labels is not None and np.array_equal(labels, new_labels):
            break
        labels = new_labels
        for j in range(c):
            centers[j] = pts[labels == j].mean(axis=0)
    return labels, centers, np.asarray(inertias)


def kmeans(
    features,
    c: int,
    seed: int = 0,
    max_iter: int = 300,
    n_restarts: int = 1,
) -> Partition:
    """Seeded k-means++ plus Lloyd iterations on column samples.

    Runs ``n_restarts`` independent seeded initializations and keeps the
    lowest-inertia result (ties keep the earliest restart). Iteration stops
    when assignments repeat or ``max_iter`` is hit; a cluster that goes
    empty is refilled with the point farthest from its centroid.
    """
    columns = _feature_columns(features)
    n = columns.shape[1]
    if c < 1:
        raise ParameterError("cluster count must be >= 1")
    if c > n:
        raise ParameterError(f"cluster count {c} exceeds sample count {n}")
    if n_restarts < 1:
        raise ParameterError("n_restarts must be >= 1")
    pts = np.ascontiguousarray(columns.T)

    best_labels, best_inertia = None, np.inf
    for restart in range(n_restarts):
        rng = np.random.default_rng([seed, restart])
        centers = _plusplus_init(pts, c, rng)
        labels, _, inertias = _lloyd(pts, centers, max_iter)
        if inertias[-1] < best_inertia:
            best_labels, best_inertia = labels, inertias[-1]
    return Partition(labels=best_labels, n_clusters=c)


def knn_affinity(
    features,
    k_nn: int,
    mode: str = "binary",
    sigma: float = 1.0,
    chunk_rows: int = 1024,
) -> AffinityGraph:
    """Symmetrized k-nearest-neighbor graph over column samples.

    Each point contributes directed edges to its ``k_nn`` Euclidean nearest
    neighbors (self excluded, distance ties broken toward the lower index);
    the result is symmetrized as ``W = max(W, W^T)``. Binary mode weights
    every edge 1; gaussian mode weights ``exp(-d^2 / (2 sigma^2))``.
    """
    columns = _feature_columns(features)
    n = columns.shape[1]
    if not 1 <= k_nn < n:
        raise ParameterError(f"k_nn must satisfy 1 <= k_nn < n={n}")
    if mode not in ("binary", "gaussian"):
        raise ParameterError(f"unknown affinity mode {mode!r}")
    if mode == "gaussian" and sigma <= 0:
        raise ParameterError("sigma must be positive")
    pts = np.ascontiguousarray(columns.T)

    rows = np.empty(n * k_nn, dtype=np.int64)
    cols = np.empty(n * k_nn, dtype=np.int64)
    vals = np.empty(n * k_nn)
    for start in range(0, n, chunk_rows):
        stop = min(start + chunk_rows, n)
        d2 = cdist(pts[start:stop], pts, "sqeuclidean")
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        order = np.argsort(d2, axis=1, kind="stable")[:, :k_nn]
        sel = np.take_along_axis(d2, order, axis=1)
        block = slice(start * k_nn, stop * k_nn)
        rows[block] = np.repeat(np.arange(start, stop), k_nn)
        cols[block] = order.ravel()
        vals[block] = 1.0 if mode == "binary" else np.exp(-sel.ravel() / (2.0 * sigma**2))

    w = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    w = w.maximum(w.T)
    return AffinityGraph(weights=w)


def laplacian(g: AffinityGraph) -> LaplacianMatrix:
    """Degree matrix minus weights: L[i, i] = d_i, L[i, j] = -W[i, j]."""
    degrees = np.asarray(g.weights.sum(axis=1)).ravel()
    lap = sp.diags(degrees) - g.weights
    return LaplacianMatrix(matrix=sp.csr_matrix(lap), degrees=degrees)


def spectral_embed(l: LaplacianMatrix, c: int, solver: str = "auto") -> SpectralEmbedding:
    """The ``c`` smallest eigenpairs of a Laplacian, ascending.

    Small problems (n <= 2000) go through the dense symmetric solver; larger
    ones use ARPACK in shift-invert mode anchored just below zero, tolerance
    1e-6, capped at 5000 iterations. ``solver`` may force "dense" or
    "iterative".
    """
    n = l.matrix.shape[0]
    if c < 2:
        raise ParameterError("need at least 2 clusters for a spectral embedding")
    if n <= c:
        raise ParameterError(f"need more than c={c} samples, got {n}")
    if solver not in ("auto", "dense", "iterative"):
        raise ParameterError(f"unknown solver {solver!r}")
    if solver == "auto":
        solver = "dense" if n <= DENSE_EIG_LIMIT else "iterative"

    if solver == "dense":
        values, vectors = np.linalg.eigh(l.matrix.toarray())
        values, vectors = values[:c], vectors[:, :c]
    else:
        v0 = np.random.default_rng(0).standard_normal(n)
        try:
            values, vectors = eigsh(
                l.matrix.tocsc(),
                k=c,
                sigma=-1e-3,
                which="LM",
                tol=EIG_TOL,
                maxiter=EIG_MAXITER,
                v0=v0,
            )
        except ArpackNoConvergence as exc:
            raise NumericError(f"eigensolver did not converge: {exc}") from exc
        except ArpackError as exc:
            raise NumericError(f"eigensolver failed: {exc}") from exc
        order = np.argsort(values, kind="stable")
        values, vectors = values[order], vectors[:, order]
    return SpectralEmbedding(eigenvalues=values, vectors=vectors)


def spectral_cluster(
    features,
    c: int,
    k_nn: int = 10,
    seed: int = 0,
    mode: str = "binary",
    sigma: float = 1.0,
    solver: str = "auto",
) -> Partition:
    """KNN graph, Laplacian spectrum, then k-means on the embedding rows."""
    columns = _feature_columns(features)
    graph = knn_affinity(columns, k_nn, mode=mode, sigma=sigma)
    emb = spectral_embed(laplacian(graph), c, solver=solver)
    return kmeans(emb.embedding.T, c, seed=seed)


def reduce_tile_codes(codes: Iterable[TileCode], strategy: str = "center") -> np.ndarray:
    """Collapse each tile code to one dense column per center pixel.

    ``mean`` averages the tile's dense coefficient columns; ``center`` takes
    the column of the tile's middle pixel. Columns come out in stream order,
    which for tiles produced by ``extract_tiles`` is the row-major scan of
    interior pixels.
    """
    if strategy not in ("mean", "center"):
        raise ParameterError(f"unknown reduction strategy {strategy!r}")
    out_cols = []
    k = None
    for code in codes:
        if k is None:
            k = code.k
        elif code.k != k:
            raise ParameterError("tile codes disagree on dictionary size")
        dense = code.to_dense()
        if strategy == "mean":
            out_cols.append(dense.mean(axis=1))
        else:
            if code.n_columns == 1:
                out_cols.append(dense[:, 0])
                continue
            if code.shape is None:
                raise ParameterError("tile shape unknown, cannot locate the center column")
            p, q = code.shape
            out_cols.append(dense[:, (p // 2) * q + q // 2])
    if not out_cols:
        raise ParameterError("no tile codes to reduce")
    return np.stack(out_cols, axis=1)
