"""Cluster-map rendering: fixed palette, masked pixels black, plain PNGs."""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import DataError, ParameterError

# 17 colorblind-safe colors (Okabe-Ito plus Tol muted); class ids wrap around.
PALETTE = np.array(
    [
        (230, 159, 0),
        (86, 180, 233),
        (0, 158, 115),
        (240, 228, 66),
        (0, 114, 178),
        (213, 94, 0),
        (204, 121, 167),
        (153, 153, 153),
        (51, 34, 136),
        (136, 204, 238),
        (68, 170, 153),
        (17, 119, 51),
        (153, 153, 51),
        (221, 204, 119),
        (204, 102, 119),
        (136, 34, 85),
        (170, 68, 153),
    ],
    dtype=np.uint8,
)


def render_partition(
    labels: np.ndarray,
    coords: np.ndarray,
    rows: int,
    cols: int,
    palette: np.ndarray | None = None,
) -> np.ndarray:
    """Paint cluster labels back into image positions.

    Pixels without a label (masked or border) stay black. Returns an
    ``(rows, cols, 3)`` uint8 array.
    """
    labels = np.asarray(labels, dtype=np.int64)
    coords = np.asarray(coords, dtype=np.int64)
    if labels.ndim != 1 or coords.shape != (labels.size, 2):
        raise DataError(
            f"labels ({labels.shape}) and coords ({coords.shape}) do not align"
        )
    if labels.size and labels.min() < 0:
        raise DataError("negative cluster label")
    pal = PALETTE if palette is None else np.asarray(palette, dtype=np.uint8)
    if pal.ndim != 2 or pal.shape[1] != 3 or pal.shape[0] < 1:
        raise ParameterError("palette must be a (n, 3) RGB table")
    if coords.size:
        if coords.min() < 0 or coords[:, 0].max() >= rows or coords[:, 1].max() >= cols:
            raise DataError(f"coordinate outside a {rows}x{cols} image")
    img = np.zeros((rows, cols, 3), dtype=np.uint8)
    img[coords[:, 0], coords[:, 1]] = pal[labels % pal.shape[0]]
    return img


def save_png(img: np.ndarray, path) -> None:
    """Write an 8-bit RGB array as a PNG (no metadata, reproducible bytes)."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ParameterError(f"expected (rows, cols, 3) uint8, got {img.shape} {img.dtype}")
    Image.fromarray(img, mode="RGB").save(path, format="PNG")


def montage(tiles: list[list[np.ndarray | None]], pad: int = 2) -> np.ndarray:
    """Lay prerendered maps out in a grid; missing cells render black."""
    if not tiles or not tiles[0]:
        raise ParameterError("montage needs at least one tile")
    cell_r = max(t.shape[0] for row in tiles for t in row if t is not None)
    cell_c = max(t.shape[1] for row in tiles for t in row if t is not None)
    grid_r = len(tiles)
    grid_c = max(len(row) for row in tiles)
    out = np.zeros(
        (grid_r * cell_r + pad * (grid_r - 1), grid_c * cell_c + pad * (grid_c - 1), 3),
        dtype=np.uint8,
    )
    out[:] = 255
    for i, row in enumerate(tiles):
        for j, tile in enumerate(row):
            r0 = i * (cell_r + pad)
            c0 = j * (cell_c + pad)
            block = np.zeros((cell_r, cell_c, 3), dtype=np.uint8)
            if tile is not None:
                block[: tile.shape[0], : tile.shape[1]] = tile
            out[r0 : r0 + cell_r, c0 : c0 + cell_c] = block
    return out
