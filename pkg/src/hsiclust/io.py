"""Loading, persistence and flattening of cubes, labels, dictionaries, codes.

Three binary containers are used besides plain npy:

* cubes: npy v1.0 (little-endian f4/f8/u1/u2, C order) or "hsraw", a
  self-describing dump (magic ``HSRAW\\0\\0\\1``, three u32 LE dims,
  float64 LE payload, row-major by pixel then band);
* dictionaries: "SDICT" (magic ``SDICT\\0\\0\\1``, u32 m, u32 k, float64
  atoms column-major, a flag byte followed by the training accumulators and
  counters when present, CRC32 footer);
* sparse codes: "SCODE" (magic ``SCODE\\0\\0\\1``, u32 k, u64 n, per column
  a u32 count plus (u32 index, f64 value) pairs, CRC32 footer).

Dense feature matrices (principal components, factor codes) have no format
of their own: convert with ``codes_from_dense`` and persist via SCODE.

All functions are pure over their inputs; nothing here keeps shared state.
MATLAB containers are intentionally not read; export .mat scenes to npy
externally (scipy.io.loadmat + numpy.save) before ingesting.
"""

from __future__ import annotations

import struct
import warnings
import zlib
from dataclasses import dataclass

import numpy as np

from .dictionary import OdlState
from .errors import DataError, ParameterError
from .pursuit import Dictionary, SparseCode, SparseCodeMatrix

HSRAW_MAGIC = b"HSRAW\x00\x00\x01"
SDICT_MAGIC = b"SDICT\x00\x00\x01"
SCODE_MAGIC = b"SCODE\x00\x00\x01"

_NPY_OK_DTYPES = (np.float32, np.float64, np.uint8, np.uint16)


@dataclass
class HsiCube:
    """Reflectance cube, ``data`` shaped (rows, cols, bands), float64."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if self.data.ndim != 3 or min(self.data.shape) < 1:
            raise DataError(f"cube must be 3-D with positive dims, got shape {self.data.shape}")
        _require_finite(self.data, "cube")

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def bands(self) -> int:
        return self.data.shape[2]


@dataclass
class LabelMap:
    """Ground-truth class ids per pixel; 0 marks miscellaneous/unlabeled."""

    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.ascontiguousarray(self.labels)
        if self.labels.ndim != 2:
            raise DataError(f"label map must be 2-D, got shape {self.labels.shape}")
        if not np.issubdtype(self.labels.dtype, np.integer):
            as_int = self.labels.astype(np.int64)
            if not np.array_equal(as_int, self.labels):
                raise DataError("label map holds non-integer values")
            self.labels = as_int
        if self.labels.min() < 0:
            raise DataError("label map holds negative values")

    @property
    def rows(self) -> int:
        return self.labels.shape[0]

    @property
    def cols(self) -> int:
        return self.labels.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max())


@dataclass
class PixelMatrix:
    """Retained pixel spectra as columns, with their image coordinates."""

    columns: np.ndarray  # (bands, n)
    coords: np.ndarray  # (n, 2) of (row, col)

    def __post_init__(self):
        self.columns = np.ascontiguousarray(self.columns, dtype=np.float64)
        self.coords = np.ascontiguousarray(self.coords, dtype=np.int64)
        if self.columns.ndim != 2:
            raise DataError(f"pixel matrix must be 2-D, got shape {self.columns.shape}")
        if self.coords.shape != (self.columns.shape[1], 2):
            raise DataError("coords must pair one (row, col) with each column")
        _require_finite(self.columns, "pixel matrix")

    @property
    def m(self) -> int:
        return self.columns.shape[0]

    @property
    def n(self) -> int:
        return self.columns.shape[1]


def _require_finite(arr: np.ndarray, what: str) -> None:
    finite = np.isfinite(arr)
    if not finite.all():
        idx = tuple(int(v) for v in np.argwhere(~finite)[0])
        raise DataError(f"{what} holds a non-finite value at index {idx}")


def load_cube(path, format: str = "npy") -> HsiCube:
    """Read a cube from disk, casting values to float64."""
    if format == "npy":
        arr = _load_npy_strict(path)
        if arr.ndim != 3:
            raise DataError(f"{path}: expected a 3-D cube, file holds {arr.ndim}-D data")
        data = arr.astype(np.float64)
    elif format == "hsraw":
        data = _load_hsraw(path)
    else:
        raise ParameterError(f"unknown cube format {format!r}")
    _require_finite(data, f"{path}")
    return HsiCube(data=data)


def save_cube(cube: HsiCube, path, format: str = "npy") -> None:
    if format == "npy":
        np.save(path, cube.data)
    elif format == "hsraw":
        with open(path, "wb") as fh:
            fh.write(HSRAW_MAGIC)
            fh.write(struct.pack("<III", cube.rows, cube.cols, cube.bands))
            fh.write(cube.data.astype("<f8").tobytes())
    else:
        raise ParameterError(f"unknown cube format {format!r}")


def _load_npy_strict(path) -> np.ndarray:
    try:
        arr = np.load(path, allow_pickle=False)
    except (ValueError, OSError, EOFError) as exc:
        raise DataError(f"{path}: malformed npy file: {exc}") from exc
    dtype = arr.dtype
    if dtype.byteorder == ">":
        raise DataError(f"{path}: big-endian payloads are not accepted")
    if dtype.type not in _NPY_OK_DTYPES:
        raise DataError(
            f"{path}: dtype {dtype} not accepted (use float32/float64/uint8/uint16)"
        )
    if arr.ndim >= 2 and not arr.flags.c_contiguous:
        raise DataError(f"{path}: Fortran-order arrays are not accepted (save in C order)")
    return arr


def _load_hsraw(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 20:
        raise DataError(f"{path}: truncated hsraw header")
    if blob[:5] != HSRAW_MAGIC[:5] or blob[5:7] != b"\x00\x00":
        raise DataError(f"{path}: bad hsraw magic")
    if blob[7] != HSRAW_MAGIC[7]:
        raise DataError(f"{path}: unsupported hsraw version {blob[7]}")
    rows, cols, bands = struct.unpack("<III", blob[8:20])
    if min(rows, cols, bands) < 1:
        raise DataError(f"{path}: non-positive dims ({rows}, {cols}, {bands})")
    expected = rows * cols * bands
    payload = blob[20:]
    if len(payload) != 8 * expected:
        raise DataError(
            f"{path}: header promises {expected} values, payload holds {len(payload) // 8}"
        )
    data = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return data.reshape(rows, cols, bands)


def load_labels(path) -> LabelMap:
    """Read a ground-truth label map from a 2-D npy array."""
    try:
        arr = np.load(path, allow_pickle=False)
    except (ValueError, OSError, EOFError) as exc:
        raise DataError(f"{path}: malformed npy file: {exc}") from exc
    if arr.ndim != 2:
        raise DataError(f"{path}: label map must be 2-D, got {arr.ndim}-D")
    return LabelMap(labels=arr)


def flatten(
    cube: HsiCube,
    gt: LabelMap | None = None,
    normalize: bool = True,
) -> tuple[PixelMatrix, np.ndarray | None]:
    """Unroll a cube into pixel columns, masking the miscellaneous class.

    When a label map is supplied only pixels with a nonzero label are kept;
    columns follow the row-major scan of retained pixels. All-zero spectra
    are dropped with a warning (they carry no signal and cannot be
    normalized). With ``normalize=True`` every kept column is scaled to unit
    Euclidean norm. Returns the matrix and, when labels were given, the
    aligned label vector.
    """
    rows, cols, bands = cube.rows, cube.cols, cube.bands
    if gt is not None and (gt.rows, gt.cols) != (rows, cols):
        raise DataError(
            f"label map is {gt.rows}x{gt.cols}, cube is {rows}x{cols}"
        )
    mask = np.ones((rows, cols), dtype=bool) if gt is None else gt.labels != 0
    if not mask.any():
        raise DataError("empty selection: every pixel is masked out")

    coords = np.argwhere(mask)
    columns = cube.data[mask].T.astype(np.float64)  # (bands, n), row-major pixels
    labels = gt.labels[mask] if gt is not None else None

    norms = np.linalg.norm(columns, axis=0)
    zero = norms == 0
    if zero.any():
        warnings.warn(f"dropping {int(zero.sum())} all-zero spectra", stacklevel=2)
        keep = ~zero
        columns = columns[:, keep]
        coords = coords[keep]
        norms = norms[keep]
        if labels is not None:
            labels = labels[keep]
        if columns.shape[1] == 0:
            raise DataError("empty selection: every retained spectrum is all-zero")
    if normalize:
        columns = columns / norms

    return PixelMatrix(columns=columns, coords=coords), labels


def save_dictionary(d: Dictionary | OdlState, path) -> None:
    """Persist a dictionary, with accumulators and counters when given a state."""
    if isinstance(d, OdlState):
        dictionary, state = d.dictionary, d
    elif isinstance(d, Dictionary):
        dictionary, state = d, None
    else:
        raise ParameterError(f"cannot save object of type {type(d).__name__}")
    parts = [SDICT_MAGIC, struct.pack("<II", dictionary.m, dictionary.k)]
    parts.append(dictionary.atoms.tobytes(order="F"))
    if state is None:
        parts.append(b"\x00")
    else:
        parts.append(b"\x01")
        parts.append(state.code_gram.tobytes(order="F"))
        parts.append(state.data_code_cross.tobytes(order="F"))
        parts.append(struct.pack("<QQ", state.steps, state.seed))
    body = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body)))


def load_dictionary(path) -> Dictionary | OdlState:
    """Read an SDICT file; returns a bare Dictionary or a full training state."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 21:
        raise DataError(f"{path}: truncated SDICT file")
    if blob[:5] != SDICT_MAGIC[:5] or blob[5:7] != b"\x00\x00":
        raise DataError(f"{path}: bad SDICT magic")
    if blob[7] != SDICT_MAGIC[7]:
        raise DataError(f"{path}: unsupported SDICT version {blob[7]}")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise DataError(f"{path}: checksum mismatch, file is corrupt")

    m, k = struct.unpack("<II", body[8:16])
    offset = 16
    atoms, offset = _take_f64(body, offset, (m, k), path)
    norms = np.linalg.norm(atoms, axis=0)
    bad = np.nonzero(norms > 1.0 + 1e-12)[0]
    if bad.size:
        raise DataError(f"{path}: atom column {bad[0]} has norm {norms[bad[0]]:.17g} > 1")
    dictionary = Dictionary(atoms, allow_undercomplete=True)

    if offset >= len(body):
        raise DataError(f"{path}: missing accumulator flag")
    flag = body[offset]
    offset += 1
    if flag == 0:
        _expect_end(body, offset, path)
        return dictionary
    if flag != 1:
        raise DataError(f"{path}: bad accumulator flag {flag}")
    gram, offset = _take_f64(body, offset, (k, k), path)
    cross, offset = _take_f64(body, offset, (m, k), path)
    if offset + 16 > len(body):
        raise DataError(f"{path}: truncated training counters")
    steps, seed = struct.unpack("<QQ", body[offset : offset + 16])
    _expect_end(body, offset + 16, path)
    try:
        return OdlState(
            dictionary=dictionary,
            code_gram=gram,
            data_code_cross=cross,
            steps=int(steps),
            seed=int(seed),
        )
    except ParameterError as exc:
        raise DataError(f"{path}: invalid training state: {exc}") from exc


def _take_f64(body: bytes, offset: int, shape: tuple[int, int], path) -> tuple[np.ndarray, int]:
    count = shape[0] * shape[1]
    end = offset + 8 * count
    if end > len(body):
        raise DataError(f"{path}: truncated payload (wanted {count} float64 values)")
    arr = np.frombuffer(body[offset:end], dtype="<f8").reshape(shape, order="F")
    return np.ascontiguousarray(arr), end


def _expect_end(body: bytes, offset: int, path) -> None:
    if offset != len(body):
        raise DataError(f"{path}: {len(body) - offset} unexpected trailing bytes")


def save_codes(a: SparseCodeMatrix, path) -> None:
    """Persist a sparse code matrix in the SCODE container."""
    parts = [SCODE_MAGIC, struct.pack("<IQ", a.k, a.n)]
    for code in a.codes:
        parts.append(struct.pack("<I", code.nnz))
        for idx, val in zip(code.indices, code.values):
            parts.append(struct.pack("<Id", int(idx), float(val)))
    body = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body)))


def load_codes(path) -> SparseCodeMatrix:
    """Read an SCODE file back into a sparse code matrix."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 24:
        raise DataError(f"{path}: truncated SCODE file")
    if blob[:5] != SCODE_MAGIC[:5] or blob[5:7] != b"\x00\x00":
        raise DataError(f"{path}: bad SCODE magic")
    if blob[7] != SCODE_MAGIC[7]:
        raise DataError(f"{path}: unsupported SCODE version {blob[7]}")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise DataError(f"{path}: checksum mismatch, file is corrupt")

    k, n = struct.unpack("<IQ", body[8:20])
    offset = 20
    codes = []
    for j in range(n):
        if offset + 4 > len(body):
            raise DataError(f"{path}: truncated at column {j}")
        (count,) = struct.unpack("<I", body[offset : offset + 4])
        offset += 4
        if offset + 12 * count > len(body):
            raise DataError(f"{path}: truncated entries in column {j}")
        indices = np.empty(count, dtype=np.int64)
        values = np.empty(count)
        for e in range(count):
            idx, val = struct.unpack("<Id", body[offset : offset + 12])
            offset += 12
            if idx >= k:
                raise DataError(f"{path}: column {j} references atom {idx} >= k={k}")
            indices[e] = idx
            values[e] = val
        if np.unique(indices).size != count:
            raise DataError(f"{path}: column {j} holds a duplicate atom index")
        codes.append(SparseCode(k=k, indices=indices, values=values, s=max(int(count), 1)))
    _expect_end(body, offset, path)
    return SparseCodeMatrix(k=k, codes=codes)


def codes_from_dense(matrix: np.ndarray) -> SparseCodeMatrix:
    """Wrap a dense feature matrix as per-column nonzero codes for SCODE storage."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ParameterError(f"expected a 2-D matrix, got shape {matrix.shape}")
    k = matrix.shape[0]
    codes = []
    for j in range(matrix.shape[1]):
        idx = np.nonzero(matrix[:, j])[0]
        codes.append(
            SparseCode(k=k, indices=idx, values=matrix[idx, j], s=max(int(idx.size), 1))
        )
    return SparseCodeMatrix(k=k, codes=codes)
