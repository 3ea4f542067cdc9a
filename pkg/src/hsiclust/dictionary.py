"""Online dictionary learning with per-datum accumulator updates.

Training processes one sample (or one mini-batch, or one spatial tile) per
iteration: the sample is sparse-coded against the current dictionary, two
sufficient-statistic matrices are bumped by rank-one (or rank-|support|)
terms, and every used atom is refreshed by a block-coordinate step

    u_j = d_j + (cross_j - D @ gram_j) / gram[j, j]
    d_j <- u_j / max(||u_j||, 1)

where ``gram`` accumulates code outer products and ``cross`` accumulates
signal-code outer products. Projecting onto the unit ball (rather than the
sphere) means atom norms may drop below one; they never exceed it.

The random stream is derived per global step as ``default_rng([seed, t])``,
which makes training resumable and bitwise reproducible from ``(seed, t)``
alone: continuing a saved state replays exactly the draws a longer run would
have made.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterator

import numpy as np

from .errors import NumericError, ParameterError
from .pursuit import Dictionary, TileCode, omp, somp

if TYPE_CHECKING:
    from .io import HsiCube, PixelMatrix

# Atoms whose accumulated code energy is below this are left untouched by
# the column sweep (division guard for never-selected atoms).
DIAG_EPS = 1e-10


@dataclass
class OdlState:
    """Dictionary plus the sufficient statistics accumulated so far."""

    dictionary: Dictionary
    code_gram: np.ndarray  # (k, k), sum of code outer products
    data_code_cross: np.ndarray  # (m, k), sum of signal-code outer products
    steps: int = 0
    seed: int = 0

    def __post_init__(self):
        k = self.dictionary.k
        m = self.dictionary.m
        self.code_gram = np.ascontiguousarray(self.code_gram, dtype=np.float64)
        self.data_code_cross = np.ascontiguousarray(self.data_code_cross, dtype=np.float64)
        if self.code_gram.shape != (k, k):
            raise ParameterError(f"code_gram must be ({k}, {k}), got {self.code_gram.shape}")
        if self.data_code_cross.shape != (m, k):
            raise ParameterError(
                f"data_code_cross must be ({m}, {k}), got {self.data_code_cross.shape}"
            )
        asym = np.abs(self.code_gram - self.code_gram.T).max() if k else 0.0
        if asym > 1e-9:
            raise ParameterError(f"code_gram asymmetry {asym:.3g} exceeds 1e-9")
        if self.steps < 0:
            raise ParameterError("steps must be >= 0")


@dataclass
class TrainConfig:
    """Hyperparameters of a training run.

    ``lam`` is the l1 weight of the underlying objective; it is accepted for
    completeness but has no effect while coding stops on the nonzero count,
    which is the only stopping rule used here.
    """

    n_atoms: int
    sparsity: int
    iterations: int
    lam: float = 0.0
    seed: int = 0
    tile: tuple[int, int] | None = None
    batch_size: int = 1

    def __post_init__(self):
        if self.n_atoms < 1:
            raise ParameterError("n_atoms must be >= 1")
        if self.sparsity < 1:
            raise ParameterError("sparsity must be >= 1")
        if self.iterations < 1:
            raise ParameterError("iterations must be >= 1")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")
        if self.seed < 0:
            raise ParameterError("seed must be >= 0")
        if self.tile is not None:
            p, q = self.tile
            if p < 1 or q < 1 or p % 2 == 0 or q % 2 == 0:
                raise ParameterError(f"tile dims must be odd and positive, got {self.tile}")


def suggested_atom_count(m: int) -> int:
    """Rule-of-thumb dictionary size: twice the signal dimension."""
    return 2 * m


def _columns_of(x) -> np.ndarray:
    columns = getattr(x, "columns", x)
    columns = np.asarray(columns, dtype=np.float64)
    if columns.ndim != 2:
        raise ParameterError(f"expected a 2-D column matrix, got shape {columns.shape}")
    return columns


def init_dictionary(
    x,
    k: int,
    seed: int | np.random.Generator = 0,
    *,
    allow_undercomplete: bool = False,
) -> Dictionary:
    """Seed a dictionary with renormalized data columns.

    Columns are drawn uniformly without replacement, falling back to drawing
    with replacement when the data has fewer columns than atoms requested.
    """
    columns = _columns_of(x)
    m, n = columns.shape
    if n < 1:
        raise ParameterError("cannot initialize a dictionary from an empty pixel matrix")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    idx = rng.choice(n, size=k, replace=n < k)
    atoms = columns[:, idx].copy()
    norms = np.linalg.norm(atoms, axis=0)
    if np.any(norms == 0):
        raise ParameterError("drawn an all-zero column; remove empty spectra before training")
    atoms /= norms
    return Dictionary(atoms, allow_undercomplete=allow_undercomplete)


def _sweep_columns(atoms: np.ndarray, gram: np.ndarray, cross: np.ndarray) -> None:
    """One block-coordinate pass over all dictionary columns, in place."""
    for j in range(atoms.shape[1]):
        ajj = gram[j, j]
        if ajj <= DIAG_EPS:
            continue
        u = atoms[:, j] + (cross[:, j] - atoms @ gram[:, j]) / ajj
        if not np.isfinite(u).all():
            raise NumericError(f"non-finite update for atom {j}")
        atoms[:, j] = u / max(np.linalg.norm(u), 1.0)


def _absorb_batch(state: OdlState, batch: np.ndarray, s: int) -> float:
    """Code a batch, fold it into the accumulators, sweep columns.

    Returns the mean per-column coding residual norm measured against the
    pre-sweep dictionary. Mutates ``state`` and bumps its step counter by 1.
    """
    resid_sum = 0.0
    for i in range(batch.shape[1]):
        x_t = batch[:, i]
        code = omp(state.dictionary, x_t, s)
        sub = state.dictionary.atoms[:, code.indices]
        resid_sum += float(np.linalg.norm(x_t - sub @ code.values))
        state.code_gram[np.ix_(code.indices, code.indices)] += np.outer(code.values, code.values)
        state.data_code_cross[:, code.indices] += np.outer(x_t, code.values)
    _sweep_columns(state.dictionary.atoms, state.code_gram, state.data_code_cross)
    state.steps += 1
    return resid_sum / batch.shape[1]


def odl_step(state: OdlState, x_t: np.ndarray, s: int, lam: float = 0.0) -> OdlState:
    """Run one online update on a single signal. Mutates and returns ``state``."""
    x_t = np.asarray(x_t, dtype=np.float64).reshape(-1)
    if x_t.shape[0] != state.dictionary.m:
        raise ParameterError(
            f"signal dimension {x_t.shape[0]} does not match dictionary m={state.dictionary.m}"
        )
    if not np.isfinite(x_t).all():
        raise ParameterError("signal contains non-finite values")
    _absorb_batch(state, x_t[:, None], s)
    return state


def _fresh_state(dictionary: Dictionary, seed: int) -> OdlState:
    k, m = dictionary.k, dictionary.m
    return OdlState(
        dictionary=dictionary,
        code_gram=np.zeros((k, k)),
        data_code_cross=np.zeros((m, k)),
        steps=0,
        seed=seed,
    )


def train(
    x,
    cfg: TrainConfig,
    *,
    allow_undercomplete: bool = False,
) -> tuple[OdlState, np.ndarray]:
    """Learn a dictionary from scratch; returns the state and a residual trace.

    The trace holds one mean coding-residual norm per iteration, measured
    before that iteration's column sweep. When ``cfg.tile`` is set the input
    must be a hyperspectral cube and training switches to the tile-based
    variant (see ``jsr_train``).
    """
    if cfg.tile is not None:
        return jsr_train(x, cfg, allow_undercomplete=allow_undercomplete)
    columns = _columns_of(x)
    n = columns.shape[1]
    if n < 1:
        raise ParameterError("cannot train on an empty pixel matrix")
    rng = np.random.default_rng(cfg.seed)
    dictionary = init_dictionary(columns, cfg.n_atoms, rng, allow_undercomplete=allow_undercomplete)
    state = _fresh_state(dictionary, cfg.seed)
    trace = _run_steps(state, columns, cfg.iterations, cfg.sparsity, cfg.batch_size)
    return state, trace


def _run_steps(
    state: OdlState, columns: np.ndarray, iterations: int, s: int, batch_size: int
) -> np.ndarray:
    n = columns.shape[1]
    trace = np.empty(iterations)
    for i in range(iterations):
        t = state.steps + 1
        draw = np.random.default_rng([state.seed, t]).integers(0, n, size=batch_size)
        trace[i] = _absorb_batch(state, columns[:, draw], s)
    return trace


def resume(state: OdlState, x_new, extra_iters: int, s: int) -> tuple[OdlState, np.ndarray]:
    """Continue training an existing state on new data only.

    Accumulators and the step counter carry over, so the learned statistics
    of previously seen data keep their weight. ``extra_iters=0`` is a no-op.
    """
    if extra_iters < 0:
        raise ParameterError("extra_iters must be >= 0")
    if extra_iters == 0:
        return state, np.empty(0)
    columns = _columns_of(x_new)
    if columns.shape[0] != state.dictionary.m:
        raise ParameterError(
            f"new data dimension {columns.shape[0]} does not match dictionary "
            f"m={state.dictionary.m}"
        )
    if columns.shape[1] < 1:
        raise ParameterError("cannot resume on an empty pixel matrix")
    trace = _run_steps(state, columns, extra_iters, s, batch_size=1)
    return state, trace


def extract_tiles(
    cube: "HsiCube", p: int, q: int
) -> Iterator[tuple[np.ndarray, tuple[int, int]]]:
    """Yield every interior tile of a cube as an ``(m, p*q)`` matrix.

    Tiles are ``p`` rows by ``q`` columns, centered on each pixel far enough
    from the border that no padding is needed; borders are skipped. Yields
    pairs of (tile matrix, center coordinate), centers in row-major order,
    tile columns row-major within the tile.
    """
    _check_tile_dims(cube, p, q)
    data = cube.data
    bands = data.shape[2]
    for r in range(p // 2, data.shape[0] - p // 2):
        for c in range(q // 2, data.shape[1] - q // 2):
            window = data[r - p // 2 : r + p // 2 + 1, c - q // 2 : c + q // 2 + 1, :]
            yield window.reshape(p * q, bands).T.copy(), (r, c)


def _check_tile_dims(cube, p: int, q: int) -> None:
    rows, cols = cube.data.shape[0], cube.data.shape[1]
    if p < 1 or q < 1 or p % 2 == 0 or q % 2 == 0:
        raise ParameterError(f"tile dims must be odd and positive, got ({p}, {q})")
    if p > rows or q > cols:
        raise ParameterError(f"tile ({p}, {q}) larger than image ({rows}, {cols})")


def _tile_at(data: np.ndarray, r: int, c: int, p: int, q: int) -> np.ndarray:
    window = data[r - p // 2 : r + p // 2 + 1, c - q // 2 : c + q // 2 + 1, :]
    return window.reshape(p * q, data.shape[2]).T


def _unit_columns(matrix: np.ndarray) -> np.ndarray:
    """Scale nonzero columns to unit norm; zero columns pass through."""
    norms = np.linalg.norm(matrix, axis=0)
    out = matrix.copy()
    nz = norms > 0
    out[:, nz] /= norms[nz]
    return out


def jsr_train(
    cube: "HsiCube",
    cfg: TrainConfig,
    *,
    normalize: bool = True,
    allow_undercomplete: bool = False,
) -> tuple[OdlState, np.ndarray]:
    """Tile-based training: each iteration absorbs one whole random tile.

    The drawn tile is jointly coded with ``somp`` so its pixels share one
    support, then the accumulators take the full tile batch (gram += Q Q^T,
    cross += T Q^T) before the usual column sweep. Tiles are drawn uniformly
    with replacement over interior centers.
    """
    if cfg.tile is None:
        raise ParameterError("jsr_train requires cfg.tile to be set")
    data = getattr(cube, "data", None)
    if data is None or data.ndim != 3:
        raise ParameterError("jsr_train expects a hyperspectral cube")
    p, q = cfg.tile
    _check_tile_dims(cube, p, q)

    rows, cols, bands = data.shape
    pixels = data.reshape(rows * cols, bands).T
    if normalize:
        pixels = _unit_columns(pixels)
    nonzero = np.linalg.norm(pixels, axis=0) > 0
    if not nonzero.any():
        raise ParameterError("cube has no nonzero spectra")

    rng = np.random.default_rng(cfg.seed)
    dictionary = init_dictionary(
        pixels[:, nonzero], cfg.n_atoms, rng, allow_undercomplete=allow_undercomplete
    )
    state = _fresh_state(dictionary, cfg.seed)

    center_rows = rows - p + 1
    center_cols = cols - q + 1
    n_tiles = center_rows * center_cols
    trace = np.empty(cfg.iterations)
    for i in range(cfg.iterations):
        t = state.steps + 1
        flat = int(np.random.default_rng([state.seed, t]).integers(0, n_tiles))
        r = p // 2 + flat // center_cols
        c = q // 2 + flat % center_cols
        tile = _tile_at(data, r, c, p, q).astype(np.float64)
        if normalize:
            tile = _unit_columns(tile)
        code = somp(state.dictionary, tile, cfg.sparsity, shape=(p, q))
        sub = state.dictionary.atoms[:, code.support]
        resid = tile - sub @ code.coefficients
        trace[i] = float(np.linalg.norm(resid, axis=0).mean())
        state.code_gram[np.ix_(code.support, code.support)] += (
            code.coefficients @ code.coefficients.T
        )
        state.data_code_cross[:, code.support] += tile @ code.coefficients.T
        _sweep_columns(state.dictionary.atoms, state.code_gram, state.data_code_cross)
        state.steps += 1
    return state, trace
