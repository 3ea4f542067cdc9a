"""Independent reference implementations used as oracles by the test suite.

Everything here is deliberately naive and recomputes from scratch rather
than sharing code with the package: greedy pursuit with pinv solves,
covariance PCA by explicit double loops, mutual information from a plain
Counter, expected MI by permutation sampling.
"""

from __future__ import annotations

from collections import Counter
from math import log

import numpy as np


def naive_omp(atoms: np.ndarray, x: np.ndarray, s: int):
    """Plain greedy pursuit: rescan correlations and re-solve every step."""
    support = []
    coef = np.zeros(0)
    for _ in range(s):
        residual = x - atoms[:, support] @ coef if support else x.copy()
        if np.linalg.norm(residual) <= 1e-12 * np.linalg.norm(x):
            break
        scores = [
            -1.0 if j in support else abs(float(atoms[:, j] @ residual))
            for j in range(atoms.shape[1])
        ]
        support.append(int(np.argmax(scores)))
        coef = np.linalg.pinv(atoms[:, support]) @ x
    return support, coef


def naive_somp(atoms: np.ndarray, tile: np.ndarray, s: int):
    """Greedy joint pursuit with l1-aggregated correlations, pinv solves."""
    support = []
    coef = np.zeros((0, tile.shape[1]))
    for _ in range(s):
        residual = tile - atoms[:, support] @ coef if support else tile.copy()
        if np.linalg.norm(residual) <= 1e-12 * np.linalg.norm(tile):
            break
        scores = [
            -1.0 if j in support else float(np.abs(atoms[:, j] @ residual).sum())
            for j in range(atoms.shape[1])
        ]
        support.append(int(np.argmax(scores)))
        coef = np.linalg.pinv(atoms[:, support]) @ tile
    return support, coef


def covariance_eigens(columns: np.ndarray):
    """Sample covariance by explicit loops, then its eigendecomposition.

    Returns eigenvalues descending and matching eigenvectors as columns.
    """
    m, n = columns.shape
    mean = columns.mean(axis=1)
    cov = np.zeros((m, m))
    for a in range(m):
        for b in range(m):
            cov[a, b] = ((columns[a] - mean[a]) * (columns[b] - mean[b])).sum() / max(n - 1, 1)
    values, vectors = np.linalg.eigh(cov)
    order = np.argsort(values)[::-1]
    return values[order], vectors[:, order]


def counter_mi(g, l) -> float:
    """Mutual information in nats straight from joint counts."""
    g = list(g)
    l = list(l)
    n = len(g)
    joint = Counter(zip(g, l))
    left = Counter(g)
    right = Counter(l)
    mi = 0.0
    for (gi, li), c in joint.items():
        mi += c / n * log(n * c / (left[gi] * right[li]))
    return max(mi, 0.0)


def mc_expected_mi(g: np.ndarray, l: np.ndarray, n_samples: int, seed: int = 0):
    """Monte Carlo expectation of MI over random relabelings of ``l``.

    Vectorized over samples; returns (mean, standard error).
    """
    g = np.asarray(g)
    l = np.asarray(l)
    n = g.size
    _, gi = np.unique(g, return_inverse=True)
    _, li = np.unique(l, return_inverse=True)
    r = gi.max() + 1
    c = li.max() + 1

    rng = np.random.default_rng(seed)
    perms = rng.permuted(np.tile(li, (n_samples, 1)), axis=1)
    cell = gi[None, :] * c + perms  # (samples, n)
    offsets = np.arange(n_samples)[:, None] * (r * c)
    counts = np.bincount((cell + offsets).ravel(), minlength=n_samples * r * c)
    counts = counts.reshape(n_samples, r, c).astype(np.float64)

    a = np.bincount(gi, minlength=r).astype(np.float64)
    b = np.bincount(li, minlength=c).astype(np.float64)
    outer = a[:, None] * b[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = counts / n * np.log(n * counts / outer[None, :, :])
    terms = np.nan_to_num(terms, nan=0.0, posinf=0.0, neginf=0.0)
    samples = terms.sum(axis=(1, 2))
    return float(samples.mean()), float(samples.std(ddof=1) / np.sqrt(n_samples))


def set_partitions(n: int):
    """All partitions of range(n) as label vectors in first-occurrence order."""
    if n == 0:
        return []
    out = []

    def grow(labels, next_label):
        i = len(labels)
        if i == n:
            out.append(np.array(labels))
            return
        for lab in range(next_label):
            grow(labels + [lab], next_label)
        grow(labels + [next_label], next_label + 1)

    grow([0], 1)
    return out


def two_rings(n_per_ring: int, radii=(1.0, 5.0), noise=0.0, seed: int = 0):
    """Concentric rings: features (2, 2 * n_per_ring) plus ring labels."""
    rng = np.random.default_rng(seed)
    points = []
    labels = []
    for ring, radius in enumerate(radii):
        angles = 2 * np.pi * np.arange(n_per_ring) / n_per_ring
        r = radius + noise * rng.standard_normal(n_per_ring)
        points.append(np.stack([r * np.cos(angles), r * np.sin(angles)]))
        labels.extend([ring] * n_per_ring)
    return np.concatenate(points, axis=1), np.array(labels)


def two_blobs(n_per_blob: int, separation: float = 50.0, seed: int = 0):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((2, n_per_blob))
    b = rng.standard_normal((2, n_per_blob)) + separation
    labels = np.array([0] * n_per_blob + [1] * n_per_blob)
    return np.concatenate([a, b], axis=1), labels


def planted_mixture_scene(
    rows: int = 20,
    cols: int = 20,
    bands: int = 32,
    seed: int = 1,
    noise: float = 0.01,
    widths=(10, 4, 3, 3),
    wide=(0.02, 1.5),
    tight=(0.5, 1.5),
):
    """Four classes as positive mixtures over disjoint orthonormal atom triples.

    Class 1 (the widest strip) draws its mixture weights from a wide range,
    the rest from a tighter one; every spectrum gets relative gaussian noise.
    Returns (data (rows, cols, bands), labels (rows, cols)) with labels 1..4.
    """
    rng = np.random.default_rng(seed)
    atoms = rng.standard_normal((bands, 12))
    atoms, _ = np.linalg.qr(atoms)
    data = np.empty((rows, cols, bands))
    labels = np.empty((rows, cols), dtype=np.int64)
    edges = np.cumsum([0] + list(widths))
    for r in range(rows):
        for c in range(cols):
            cls = int(np.searchsorted(edges, c, side="right") - 1)
            lo, hi = wide if cls == 0 else tight
            w = rng.uniform(lo, hi, size=3)
            spec = atoms[:, 3 * cls : 3 * cls + 3] @ w
            spec += noise * np.linalg.norm(spec) * rng.standard_normal(bands)
            data[r, c] = spec
            labels[r, c] = cls + 1
    return data, labels


def synthetic_scene(
    rows: int = 20,
    cols: int = 20,
    bands: int = 32,
    n_classes: int = 4,
    atoms_per_class: int = 3,
    noise: float = 0.01,
    seed: int = 0,
):
    """A cube whose classes are sparse mixtures of class-specific atoms.

    The image is split into vertical strips, one class per strip; every
    pixel mixes its class's atoms with positive weights plus relative
    gaussian noise. Returns (data (rows, cols, bands), labels (rows, cols))
    with labels in 1..n_classes.
    """
    rng = np.random.default_rng(seed)
    basis = rng.standard_normal((bands, n_classes * atoms_per_class))
    basis /= np.linalg.norm(basis, axis=0)
    data = np.empty((rows, cols, bands))
    labels = np.empty((rows, cols), dtype=np.int64)
    strip = cols / n_classes
    for r in range(rows):
        for c in range(cols):
            cls = min(int(c / strip), n_classes - 1)
            weights = 0.5 + rng.random(atoms_per_class)
            spectrum = basis[:, cls * atoms_per_class : (cls + 1) * atoms_per_class] @ weights
            spectrum = spectrum + noise * np.linalg.norm(spectrum) * rng.standard_normal(bands)
            data[r, c] = spectrum
            labels[r, c] = cls + 1
    return data, labels
