"""Synthetic transonic pressure-field dataset: generation, splits, standardization, file I/O.

Each sample is a surface pressure-coefficient (Cp) field on a structured
chord/span grid, parameterized by a flight condition (Mach number, angle of
attack). Samples are stored as columns of a q x n matrix, q = grid points,
n = flight conditions.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field

import numpy as np

DEFAULT_MACH_RANGE = (0.5, 0.96)
DEFAULT_ALPHA_RANGE = (0.0, 11.5)

SCALE_FLOOR = 1e-8

_MAGIC = b"SFM1"
_HEADER_BYTES = len(_MAGIC) + 16  # magic + u64 rows + u64 cols
_MAX_ELEMENTS = int(1e9)  # dimension overflow guard for file headers


class MatrixFormatError(Exception):
    """Raised when a binary matrix file is malformed or truncated."""


@dataclass(frozen=True)
class FlightCondition:
    """A (Mach, angle-of-attack) pair; alpha in degrees."""

    mach: float
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "mach", float(self.mach))
        object.__setattr__(self, "alpha", float(self.alpha))
        if not (math.isfinite(self.mach) and math.isfinite(self.alpha)):
            raise ValueError(f"non-finite flight condition ({self.mach}, {self.alpha})")

    def in_envelope(self, mach_range=DEFAULT_MACH_RANGE, alpha_range=DEFAULT_ALPHA_RANGE) -> bool:
        return (mach_range[0] <= self.mach <= mach_range[1]
                and alpha_range[0] <= self.alpha <= alpha_range[1])


@dataclass(frozen=True)
class GridSpec:
    """Structured chord/span surface grid with stations uniformly spaced in [0, 1]."""

    n_chord: int
    n_span: int

    def __post_init__(self):
        if self.n_chord <= 1 or self.n_span <= 1:
            raise ValueError(f"grid needs >1 station per axis, got {self.n_chord}x{self.n_span}")

    @property
    def q(self) -> int:
        return self.n_chord * self.n_span

    def xi_stations(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_chord)

    def eta_stations(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_span)

    def flat_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """(xi, eta) per flattened grid point; chordwise index varies fastest."""
        xi = np.tile(self.xi_stations(), self.n_span)
        eta = np.repeat(self.eta_stations(), self.n_chord)
        return xi, eta


@dataclass
class FieldMatrix:
    """q x n matrix of Cp samples; column i belongs to conditions[i]."""

    values: np.ndarray
    conditions: list[FlightCondition]
    grid: GridSpec

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("field matrix must be 2-D")
        q, n = self.values.shape
        if q != self.grid.q:
            raise ValueError(f"row count {q} does not match grid q={self.grid.q}")
        if n != len(self.conditions):
            raise ValueError(f"column count {n} does not match {len(self.conditions)} conditions")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field matrix contains non-finite entries")

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]

    @property
    def q(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class SplitIndices:
    """Disjoint train/test column indices covering 0..n-1."""

    train: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "train", np.asarray(self.train, dtype=np.intp))
        object.__setattr__(self, "test", np.asarray(self.test, dtype=np.intp))
        n = len(self.train) + len(self.test)
        combined = np.concatenate([self.train, self.test])
        if len(np.unique(combined)) != n or combined.min(initial=0) < 0 or (n and combined.max() != n - 1):
            raise ValueError("train/test indices must partition 0..n-1")

    @property
    def n(self) -> int:
        return len(self.train) + len(self.test)


@dataclass
class Standardizer:
    """Per-feature affine map to zero mean / unit variance, scale floored at 1e-8."""

    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64).ravel()
        self.scale = np.asarray(self.scale, dtype=np.float64).ravel()
        if self.mean.shape != self.scale.shape:
            raise ValueError("mean and scale must have equal length")
        if np.any(self.scale < SCALE_FLOOR):
            raise ValueError(f"scale entries must be >= {SCALE_FLOOR}")

    def apply(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if values.shape[0] != self.mean.shape[0]:
            raise ValueError(f"expected {self.mean.shape[0]} features, got {values.shape[0]}")
        if values.ndim == 1:
            return (values - self.mean) / self.scale
        return (values - self.mean[:, None]) / self.scale[:, None]

    def invert(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if values.shape[0] != self.mean.shape[0]:
            raise ValueError(f"expected {self.mean.shape[0]} features, got {values.shape[0]}")
        if values.ndim == 1:
            return values * self.scale + self.mean
        return values * self.scale[:, None] + self.mean[:, None]


def _field_column(xi: np.ndarray, eta: np.ndarray, mach: float, alpha: float) -> np.ndarray:
    """Deterministic Cp field law: suction peak + aft loading + moving tanh shock."""
    m = (mach - 0.5) / 0.46
    a = alpha / 11.5
    amp = (0.6 + 1.8 * a) * (1.0 - 0.35 * eta**2)
    load = 0.3 + 0.5 * a
    m_crit = 0.62 - 0.25 * a
    strength = 1.2 * max(0.0, m - m_crit)
    xi_shock = np.clip(0.25 + 0.5 * m - 0.2 * a - 0.15 * eta, 0.05, 0.9)
    step = 0.5 * (1.0 + np.tanh((xi - xi_shock) / 0.015))
    return -amp * np.exp(-xi / 0.08) - load * (1.0 - xi) * (1.0 - strength * step) + 0.1 * xi


def generate_synthetic(grid: GridSpec, conditions: list[FlightCondition],
                       noise_std: float = 0.0, seed: int = 0) -> FieldMatrix:
    """Generate a synthetic Cp field matrix, one column per flight condition.

    Deterministic for a fixed seed; per-column noise streams are keyed by
    (seed, column index) so serial and column-parallel generation agree.
    """
    if not conditions:
        raise ValueError("condition list is empty")
    if not math.isfinite(noise_std) or noise_std < 0:
        raise ValueError(f"noise_std must be finite and >= 0, got {noise_std}")
    xi, eta = grid.flat_coords()
    values = np.empty((grid.q, len(conditions)), dtype=np.float64)
    for j, cond in enumerate(conditions):
        col = _field_column(xi, eta, cond.mach, cond.alpha)
        if noise_std > 0:
            col = col + np.random.default_rng([seed, j]).normal(0.0, noise_std, size=grid.q)
        values[:, j] = col
    return FieldMatrix(values=values, conditions=list(conditions), grid=grid)


def sample_envelope(n: int, mach_range=DEFAULT_MACH_RANGE, alpha_range=DEFAULT_ALPHA_RANGE,
                    seed: int = 0, jitter: float = 1.0) -> list[FlightCondition]:
    """Sample n flight conditions on a stratified-jittered grid over the envelope.

    The rectangle is cut into ceil(sqrt(n)) x ceil(n / ceil(sqrt(n))) cells; n
    cells are picked evenly and one point drawn per cell (cell center when
    jitter = 0). Deterministic per seed.
    """
    if n < 1:
        raise ValueError("need n >= 1 conditions")
    if not (mach_range[1] > mach_range[0]) or not (alpha_range[1] > alpha_range[0]):
        raise ValueError("degenerate envelope range")
    k_mach = math.ceil(math.sqrt(n))
    k_alpha = math.ceil(n / k_mach)
    n_cells = k_mach * k_alpha
    cell_ids = (np.arange(n) + 0.5) * n_cells / n
    cell_ids = np.floor(cell_ids).astype(int)
    offsets = np.random.default_rng(seed).uniform(-0.5, 0.5, size=(n, 2)) * jitter
    mach_cell, alpha_cell = np.divmod(cell_ids, k_alpha)
    mach = mach_range[0] + (mach_cell + 0.5 + offsets[:, 0]) * (mach_range[1] - mach_range[0]) / k_mach
    alpha = alpha_range[0] + (alpha_cell + 0.5 + offsets[:, 1]) * (alpha_range[1] - alpha_range[0]) / k_alpha
    return [FlightCondition(m, a) for m, a in zip(mach, alpha)]


def split_dataset(n: int, train_fraction: float, seed: int = 0) -> SplitIndices:
    """Randomly split 0..n-1 into train/test with |train| = round(train_fraction * n)."""
    if n < 2:
        raise ValueError("need n >= 2 samples to split")
    if not (0.0 < train_fraction < 1.0):
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    # round half up, guarding against binary representation of decimal
    # fractions (0.7 * 435 must give 305, not 304)
    n_train = int(math.floor(round(train_fraction * n, 9) + 0.5))
    perm = np.random.default_rng(seed).permutation(n)
    return SplitIndices(train=np.sort(perm[:n_train]), test=np.sort(perm[n_train:]))


def fit_standardizer(values, train_columns=None) -> Standardizer:
    """Fit per-feature mean/std over the given training columns (population variance).

    Accepts a FieldMatrix or a raw 2-D array (features x samples).
    """
    if isinstance(values, FieldMatrix):
        values = values.values
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError("expected a 2-D features-by-samples array")
    cols = values if train_columns is None else values[:, np.asarray(train_columns, dtype=np.intp)]
    if cols.shape[1] < 2:
        raise ValueError("need at least 2 training columns to fit a standardizer")
    mean = cols.mean(axis=1)
    scale = np.maximum(cols.std(axis=1), SCALE_FLOOR)
    return Standardizer(mean=mean, scale=scale)


# ---------------------------------------------------------------------------
# binary matrix container ("SFM1")
#
# magic "SFM1" | u64 rows | u64 cols | rows*cols f64 row-major
# | u64 n_conditions | n_conditions x (f64 mach, f64 alpha)
# | u64 n_chord | u64 n_span
# all little-endian. Raw parameter arrays reuse the container with
# n_conditions = n_chord = n_span = 0.
# ---------------------------------------------------------------------------

def _pack_container(values: np.ndarray, cond_pairs: np.ndarray, n_chord: int, n_span: int) -> bytes:
    rows, cols = values.shape
    parts = [
        _MAGIC,
        struct.pack("<QQ", rows, cols),
        np.ascontiguousarray(values, dtype="<f8").tobytes(),
        struct.pack("<Q", len(cond_pairs)),
        np.ascontiguousarray(cond_pairs, dtype="<f8").tobytes(),
        struct.pack("<QQ", n_chord, n_span),
    ]
    return b"".join(parts)


def _unpack_container(raw: bytes, path) -> tuple[np.ndarray, np.ndarray, int, int]:
    if len(raw) < _HEADER_BYTES:
        raise MatrixFormatError(f"{path}: file shorter than header")
    if raw[:4] != _MAGIC:
        raise MatrixFormatError(f"{path}: bad magic {raw[:4]!r}, expected {_MAGIC!r}")
    rows, cols = struct.unpack_from("<QQ", raw, 4)
    if rows == 0 or cols == 0 or rows * cols > _MAX_ELEMENTS:
        raise MatrixFormatError(f"{path}: implausible dimensions {rows}x{cols}")
    off = _HEADER_BYTES
    need = rows * cols * 8
    if len(raw) < off + need + 8:
        raise MatrixFormatError(f"{path}: truncated payload")
    values = np.frombuffer(raw, dtype="<f8", count=rows * cols, offset=off).reshape(rows, cols)
    off += need
    (n_cond,) = struct.unpack_from("<Q", raw, off)
    off += 8
    if n_cond > _MAX_ELEMENTS:
        raise MatrixFormatError(f"{path}: implausible condition count {n_cond}")
    if len(raw) != off + n_cond * 16 + 16:
        raise MatrixFormatError(f"{path}: trailer size mismatch")
    cond_pairs = np.frombuffer(raw, dtype="<f8", count=n_cond * 2, offset=off).reshape(n_cond, 2)
    off += n_cond * 16
    n_chord, n_span = struct.unpack_from("<QQ", raw, off)
    return values.astype(np.float64), cond_pairs.astype(np.float64), n_chord, n_span


def save_matrix(matrix: FieldMatrix, path) -> None:
    pairs = np.array([[c.mach, c.alpha] for c in matrix.conditions], dtype=np.float64)
    with open(path, "wb") as fh:
        fh.write(_pack_container(matrix.values, pairs, matrix.grid.n_chord, matrix.grid.n_span))


def load_matrix(path) -> FieldMatrix:
    with open(path, "rb") as fh:
        raw = fh.read()
    values, pairs, n_chord, n_span = _unpack_container(raw, path)
    if len(pairs) != values.shape[1]:
        raise MatrixFormatError(f"{path}: {len(pairs)} conditions for {values.shape[1]} columns")
    if n_chord * n_span != values.shape[0]:
        raise MatrixFormatError(f"{path}: grid {n_chord}x{n_span} does not match {values.shape[0]} rows")
    try:
        grid = GridSpec(n_chord=int(n_chord), n_span=int(n_span))
        conditions = [FlightCondition(m, a) for m, a in pairs]
        return FieldMatrix(values=values.copy(), conditions=conditions, grid=grid)
    except ValueError as exc:
        raise MatrixFormatError(f"{path}: {exc}") from exc


def write_array(path, values: np.ndarray) -> None:
    """Persist a raw 1-D or 2-D float array in the SFM1 container."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    if values.ndim != 2:
        raise ValueError("write_array handles 1-D and 2-D arrays only")
    with open(path, "wb") as fh:
        fh.write(_pack_container(values, np.empty((0, 2)), 0, 0))


def read_array(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    values, pairs, n_chord, n_span = _unpack_container(raw, path)
    if len(pairs) != 0 or n_chord != 0 or n_span != 0:
        raise MatrixFormatError(f"{path}: expected a raw array container, found dataset metadata")
    return values.copy()


def export_matrix_csv(matrix: FieldMatrix, path) -> None:
    """CSV convenience export: header xi,eta then one column per condition."""
    xi, eta = matrix.grid.flat_coords()
    names = [f"M{c.mach!r}_a{c.alpha!r}" for c in matrix.conditions]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["xi", "eta"] + names)
        for i in range(matrix.q):
            writer.writerow([repr(float(xi[i])), repr(float(eta[i]))]
                            + [repr(float(v)) for v in matrix.values[i]])


def import_matrix_csv(path, grid: GridSpec) -> FieldMatrix:
    """Inverse of export_matrix_csv; the grid is supplied since CSV stores only coordinates."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["xi", "eta"]:
            raise MatrixFormatError(f"{path}: expected 'xi,eta' header, got {header[:2]}")
        conditions = []
        for name in header[2:]:
            try:
                mach_s, alpha_s = name.removeprefix("M").split("_a")
                conditions.append(FlightCondition(float(mach_s), float(alpha_s)))
            except ValueError as exc:
                raise MatrixFormatError(f"{path}: bad column name {name!r}") from exc
        rows = [[float(v) for v in row[2:]] for row in reader]
    values = np.array(rows, dtype=np.float64)
    return FieldMatrix(values=values, conditions=conditions, grid=grid)
