"""Greedy sparse coding: orthogonal matching pursuit and its joint variant.

Signals are columns of ``R^m``; the dictionary holds ``k`` unit-norm atoms.
``omp`` codes a single signal, ``somp`` codes all columns of a spatial tile
against one shared support, and ``encode_all`` maps a whole pixel matrix.
Coding stops after ``s`` atoms or once the residual is numerically zero
(below ``RESID_TOL_SCALE * ||x||``); the nonzero budget is the only
intentional stopping rule, the tolerance is a guard against selecting atoms
on noise-level residuals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DeficientSupportError, ParameterError

# Early-stop guard: residual below this fraction of the signal norm is
# treated as exactly representable.
RESID_TOL_SCALE = 1e-12


class Dictionary:
    """Matrix of unit-norm atoms, one per column.

    Overcompleteness (more atoms than signal dimensions) is enforced at
    construction; pass ``allow_undercomplete=True`` for square or thin
    dictionaries (identity dictionaries in tests, degenerate setups).
    Column norms may fall below one: the online update projects atoms onto
    the unit ball rather than the unit sphere. Norms above one are rejected.
    """

    def __init__(self, atoms: np.ndarray, *, allow_undercomplete: bool = False):
        atoms = np.ascontiguousarray(atoms, dtype=np.float64)
        if atoms.ndim != 2 or atoms.shape[0] < 1 or atoms.shape[1] < 1:
            raise ParameterError(f"atoms must be a 2-D matrix, got shape {atoms.shape}")
        if not np.isfinite(atoms).all():
            raise ParameterError("dictionary atoms contain non-finite values")
        m, k = atoms.shape
        if k <= m and not allow_undercomplete:
            raise ParameterError(
                f"dictionary is not overcomplete ({k} atoms for {m} dimensions); "
                "pass allow_undercomplete=True to permit this"
            )
        norms = np.linalg.norm(atoms, axis=0)
        bad = np.nonzero(norms > 1.0 + 1e-12)[0]
        if bad.size:
            raise ParameterError(
                f"atom {bad[0]} has norm {norms[bad[0]]:.17g} > 1"
            )
        self.atoms = atoms

    @property
    def m(self) -> int:
        return self.atoms.shape[0]

    @property
    def k(self) -> int:
        return self.atoms.shape[1]

    def copy(self) -> "Dictionary":
        out = Dictionary.__new__(Dictionary)
        out.atoms = self.atoms.copy()
        return out

    def __repr__(self) -> str:
        return f"Dictionary(m={self.m}, k={self.k})"


@dataclass
class SparseCode:
    """Sparse coefficient vector: ``values`` at ``indices``, zeros elsewhere."""

    k: int
    indices: np.ndarray  # strictly unique atom indices, length <= s
    values: np.ndarray
    s: int

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.indices.shape != self.values.shape:
            raise ParameterError("indices and values lengths differ")
        if self.indices.size and (
            self.indices.min() < 0 or self.indices.max() >= self.k
        ):
            raise ParameterError("atom index out of range")
        if np.unique(self.indices).size != self.indices.size:
            raise ParameterError("duplicate atom index in sparse code")

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.k)
        out[self.indices] = self.values
        return out


@dataclass
class SparseCodeMatrix:
    """Column-wise collection of sparse codes sharing one dictionary size."""

    k: int
    codes: list[SparseCode] = field(default_factory=list)

    def __post_init__(self):
        for j, code in enumerate(self.codes):
            if code.k != self.k:
                raise ParameterError(f"code {j} has k={code.k}, expected {self.k}")

    @property
    def n(self) -> int:
        return len(self.codes)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.k, self.n))
        for j, code in enumerate(self.codes):
            out[code.indices, j] = code.values
        return out


@dataclass
class TileCode:
    """Joint code of a tile: one shared support, one coefficient column per pixel.

    ``shape`` records the spatial tile extent (rows, cols) when known; pixel
    columns are ordered row-major within the tile.
    """

    k: int
    support: np.ndarray  # shared atom indices, length <= s
    coefficients: np.ndarray  # (len(support), n_tile_pixels)
    shape: tuple[int, int] | None = None

    def __post_init__(self):
        self.support = np.asarray(self.support, dtype=np.int64)
        self.coefficients = np.atleast_2d(np.asarray(self.coefficients, dtype=np.float64))
        if self.coefficients.shape[0] != self.support.size:
            raise ParameterError("coefficient rows must match support size")
        if self.shape is not None and self.shape[0] * self.shape[1] != self.coefficients.shape[1]:
            raise ParameterError("tile shape inconsistent with coefficient columns")

    @property
    def n_columns(self) -> int:
        return int(self.coefficients.shape[1])

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.k, self.n_columns))
        out[self.support, :] = self.coefficients
        return out


def _check_pursuit_args(d: Dictionary, signal: np.ndarray, s: int) -> None:
    if s < 1:
        raise ParameterError(f"target nonzero count must be >= 1, got {s}")
    if s > min(d.m, d.k):
        raise ParameterError(
            f"target nonzero count {s} exceeds min(m, k) = {min(d.m, d.k)}"
        )
    if signal.shape[0] != d.m:
        raise ParameterError(
            f"signal dimension {signal.shape[0]} does not match dictionary m={d.m}"
        )
    if not np.isfinite(signal).all():
        raise ParameterError("signal contains non-finite values")


def _solve_support(sub: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Least squares of ``target`` on the atom submatrix, rejecting rank loss."""
    coef, _, rank, _ = np.linalg.lstsq(sub, target, rcond=None)
    if rank < sub.shape[1]:
        raise DeficientSupportError(
            f"support of {sub.shape[1]} atoms is rank deficient (rank {rank})"
        )
    return coef


def omp(d: Dictionary, x: np.ndarray, s: int, *, debug: bool = False) -> SparseCode:
    """Orthogonal matching pursuit for one signal.

    Each step selects the atom with the largest absolute correlation against
    the current residual (ties broken toward the lowest atom index), then
    re-solves the least squares of ``x`` on the whole selected support and
    recomputes the residual. At most ``s`` atoms are selected; the loop exits
    early once the residual norm falls below ``RESID_TOL_SCALE * ||x||``.

    With ``debug=True`` the residual norm is asserted non-increasing across
    steps.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    _check_pursuit_args(d, x, s)

    resid_tol = RESID_TOL_SCALE * np.linalg.norm(x)
    residual = x.copy()
    support: list[int] = []
    coef = np.zeros(0)
    selected = np.zeros(d.k, dtype=bool)
    last_norm = np.linalg.norm(residual)

    for _ in range(s):
        if np.linalg.norm(residual) <= resid_tol:
            break
        corr = np.abs(d.atoms.T @ residual)
        corr[selected] = -1.0
        j = int(np.argmax(corr))
        support.append(j)
        selected[j] = True
        sub = d.atoms[:, support]
        coef = _solve_support(sub, x)
        residual = x - sub @ coef
        if debug:
            norm = np.linalg.norm(residual)
            assert norm <= last_norm + 1e-10 * max(1.0, last_norm)
            last_norm = norm

    return SparseCode(k=d.k, indices=np.array(support, dtype=np.int64), values=coef, s=s)


def encode_all(d: Dictionary, x, s: int) -> SparseCodeMatrix:
    """Code every column of a pixel matrix with ``omp``.

    Accepts a PixelMatrix or a plain ``(m, n)`` array. Errors from the
    per-column pursuit are re-raised with the offending column index
    attached.
    """
    columns = getattr(x, "columns", x)
    columns = np.asarray(columns, dtype=np.float64)
    if columns.ndim != 2:
        raise ParameterError(f"expected a 2-D column matrix, got shape {columns.shape}")
    if columns.shape[0] != d.m:
        raise ParameterError(
            f"pixel dimension {columns.shape[0]} does not match dictionary m={d.m}"
        )
    codes = []
    for j in range(columns.shape[1]):
        try:
            codes.append(omp(d, columns[:, j], s))
        except (ParameterError, DeficientSupportError) as exc:
            raise type(exc)(f"column {j}: {exc}") from exc
    return SparseCodeMatrix(k=d.k, codes=codes)


def somp(
    d: Dictionary,
    tile: np.ndarray,
    s: int,
    *,
    shape: tuple[int, int] | None = None,
    debug: bool = False,
) -> TileCode:
    """Simultaneous OMP: one shared support for all columns of a tile.

    Atom selection aggregates correlations across tile columns with an l1
    sum, ``score_j = sum_cols |<d_j, r_col>|``; the coefficient update is a
    joint least squares of every column on the shared support. Ties break
    toward the lowest atom index, as in ``omp``.
    """
    tile = np.asarray(tile, dtype=np.float64)
    if tile.ndim != 2 or tile.shape[1] < 1:
        raise ParameterError(f"tile must be a nonempty (m, n) matrix, got {tile.shape}")
    _check_pursuit_args(d, tile[:, 0], s)
    if not np.isfinite(tile).all():
        raise ParameterError("tile contains non-finite values")

    resid_tol = RESID_TOL_SCALE * np.linalg.norm(tile)
    residual = tile.copy()
    support: list[int] = []
    coef = np.zeros((0, tile.shape[1]))
    selected = np.zeros(d.k, dtype=bool)
    last_norm = np.linalg.norm(residual)

    for _ in range(s):
        if np.linalg.norm(residual) <= resid_tol:
            break
        scores = np.abs(d.atoms.T @ residual).sum(axis=1)
        scores[selected] = -1.0
        j = int(np.argmax(scores))
        support.append(j)
        selected[j] = True
        sub = d.atoms[:, support]
        coef = np.atleast_2d(_solve_support(sub, tile))
        residual = tile - sub @ coef
        if debug:
            norm = np.linalg.norm(residual)
            assert norm <= last_norm + 1e-10 * max(1.0, last_norm)
            last_norm = norm

    return TileCode(
        k=d.k,
        support=np.array(support, dtype=np.int64),
        coefficients=coef,
        shape=shape,
    )
