"""PCA and NMF feature extractors used as comparison points.

Both operate on column-sample matrices ``(m, n)`` and emit ``(c, n)``
features. PCA goes through an SVD of the centered data; NMF runs seeded
Frobenius multiplicative updates. Negative NMF input is rejected outright
rather than shifted, so a corrupted radiance matrix fails loudly instead of
silently skewing the comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

# Denominator floor for the multiplicative updates.
_NMF_FLOOR = 1e-12


@dataclass
class PcaModel:
    mean: np.ndarray  # (m,)
    components: np.ndarray  # (m, c), orthonormal, descending variance
    variances: np.ndarray  # (c,)


@dataclass
class NmfModel:
    w: np.ndarray  # (m, c), nonnegative basis
    h: np.ndarray  # (c, n), nonnegative codes
    iterations: int
    objective: float  # final squared Frobenius reconstruction error
    trace: np.ndarray  # objective after each iteration


def _columns_of(x) -> np.ndarray:
    columns = getattr(x, "columns", x)
    columns = np.asarray(columns, dtype=np.float64)
    if columns.ndim != 2:
        raise ParameterError(f"expected a 2-D column matrix, got shape {columns.shape}")
    return columns


def pca_fit(x, c: int) -> PcaModel:
    """Top-``c`` principal directions of column samples.

    Components are the leading left singular vectors of the centered matrix,
    sign-fixed so each component's largest-magnitude entry is positive;
    ``variances`` are the matching sample-covariance eigenvalues
    (n-1 denominator).
    """
    columns = _columns_of(x)
    m, n = columns.shape
    if not 1 <= c <= min(m, n):
        raise ParameterError(f"component count {c} outside 1..min(m, n)={min(m, n)}")
    mean = columns.mean(axis=1)
    centered = columns - mean[:, None]
    u, singular, _ = np.linalg.svd(centered, full_matrices=False)
    components = u[:, :c].copy()
    for j in range(c):
        peak = int(np.argmax(np.abs(components[:, j])))
        if components[peak, j] < 0:
            components[:, j] = -components[:, j]
    variances = singular[:c] ** 2 / max(n - 1, 1)
    return PcaModel(mean=mean, components=components, variances=variances)


def pca_transform(model: PcaModel, x) -> np.ndarray:
    """Project columns onto the fitted components after centering."""
    columns = _columns_of(x)
    if columns.shape[0] != model.mean.shape[0]:
        raise ParameterError(
            f"data dimension {columns.shape[0]} does not match model "
            f"dimension {model.mean.shape[0]}"
        )
    return model.components.T @ (columns - model.mean[:, None])


def _check_nonnegative(columns: np.ndarray) -> None:
    if columns.min(initial=0.0) < 0:
        idx = tuple(int(v) for v in np.argwhere(columns < 0)[0])
        raise ParameterError(f"negative entry at {idx}; NMF requires nonnegative input")


def _objective(x: np.ndarray, w: np.ndarray, h: np.ndarray) -> float:
    return float(np.linalg.norm(x - w @ h) ** 2)


def nmf_fit(x, c: int, iters: int = 200, seed: int = 0) -> NmfModel:
    """Nonnegative factorization by multiplicative updates.

    Factors start from seeded uniform noise scaled to the data magnitude;
    each iteration updates H then W with the Frobenius rules, flooring
    denominators at 1e-12. The objective trace is recorded after every
    iteration and is non-increasing.
    """
    columns = _columns_of(x)
    m, n = columns.shape
    _check_nonnegative(columns)
    if c < 1:
        raise ParameterError("component count must be >= 1")
    if c > min(m, n):
        raise ParameterError(f"component count {c} exceeds min(m, n)={min(m, n)}")
    if iters < 1:
        raise ParameterError("iteration count must be >= 1")

    rng = np.random.default_rng(seed)
    scale = np.sqrt(columns.mean() / c) if columns.mean() > 0 else 0.0
    w = scale * rng.random((m, c))
    h = scale * rng.random((c, n))

    trace = np.empty(iters)
    for it in range(iters):
        h *= (w.T @ columns) / np.maximum(w.T @ w @ h, _NMF_FLOOR)
        w *= (columns @ h.T) / np.maximum(w @ h @ h.T, _NMF_FLOOR)
        trace[it] = _objective(columns, w, h)
    return NmfModel(w=w, h=h, iterations=iters, objective=trace[-1], trace=trace)


def nmf_transform(model: NmfModel, x, iters: int = 200) -> np.ndarray:
    """Encode new columns against a frozen basis via the H update only."""
    columns = _columns_of(x)
    _check_nonnegative(columns)
    if columns.shape[0] != model.w.shape[0]:
        raise ParameterError(
            f"data dimension {columns.shape[0]} does not match basis "
            f"dimension {model.w.shape[0]}"
        )
    if iters < 1:
        raise ParameterError("iteration count must be >= 1")
    w = model.w
    h = w.T @ columns  # nonnegative start; zero columns stay exactly zero
    wtw = w.T @ w
    wtx = w.T @ columns
    for _ in range(iters):
        h *= wtx / np.maximum(wtw @ h, _NMF_FLOOR)
    return h
